"""Operation-cost meters.

Dense operators report the number of table cells they touch; sparse
operators report the number of hash entries they visit.  Meters are opened
with :func:`metered` and every active meter receives each tick.
"""
from contextlib import contextmanager

_active = []


class WorkMeter:
    def __init__(self):
        self.dense_cells = 0
        self.sparse_visits = 0
        self.add_nodes = 0

    def as_dict(self):
        return {
            "dense_cells": self.dense_cells,
            "sparse_visits": self.sparse_visits,
            "add_nodes": self.add_nodes,
        }


@contextmanager
def metered():
    meter = WorkMeter()
    _active.append(meter)
    try:
        yield meter
    finally:
        _active.remove(meter)


def tick(kind, n):
    for meter in _active:
        setattr(meter, kind, getattr(meter, kind) + n)
