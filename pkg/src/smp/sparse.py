"""Zero-suppressed tables: only tuples with a strictly positive value are stored.

Products are hash joins on the shared variables and summation is a grouped
projection, so each operator visits every input and output entry a constant
number of times.  Visits are reported to :mod:`smp.work` meters.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import ContractError, DivisionSupportError
from .factor import DenseFactor
from .work import tick


@dataclass(frozen=True, eq=False)
class SupportRelation:
    """A set of tuples over ``scope`` that are allowed to be nonzero."""

    scope: tuple
    cards: tuple
    tuples: frozenset = field(repr=False)

    def __post_init__(self):
        scope = tuple(self.scope)
        if list(scope) != sorted(scope):
            perm = sorted(range(len(scope)), key=scope.__getitem__)
            object.__setattr__(self, "scope", tuple(scope[p] for p in perm))
            object.__setattr__(self, "cards", tuple(self.cards[p] for p in perm))
            object.__setattr__(
                self, "tuples", frozenset(tuple(t[p] for p in perm) for t in self.tuples)
            )
        else:
            object.__setattr__(self, "scope", scope)
            object.__setattr__(self, "cards", tuple(self.cards))
            object.__setattr__(self, "tuples", frozenset(map(tuple, self.tuples)))
        for t in self.tuples:
            if len(t) != len(self.scope) or any(
                not 0 <= x < c for x, c in zip(t, self.cards)
            ):
                raise ContractError(f"tuple {t} outside domain of scope {self.scope}")

    @classmethod
    def full(cls, scope, cards):
        return cls(scope, cards, frozenset(itertools.product(*(range(c) for c in cards))))

    def __len__(self):
        return len(self.tuples)

    def __contains__(self, t):
        return tuple(t) in self.tuples

    def project(self, scope):
        idx = [self.scope.index(v) for v in scope]
        cards = [self.cards[i] for i in idx]
        return SupportRelation(scope, cards, {tuple(t[i] for i in idx) for t in self.tuples})

    def union(self, other):
        if other.scope != self.scope:
            raise ContractError("support union over different scopes")
        return SupportRelation(self.scope, self.cards, self.tuples | other.tuples)

    def mask(self):
        """Boolean n-d array over the scope, True on member tuples."""
        m = np.zeros(self.cards, dtype=bool)
        if self.tuples:
            idx = np.array(sorted(self.tuples), dtype=np.intp).reshape(-1, len(self.scope))
            m[tuple(idx.T)] = True
        return m


@dataclass(frozen=True, eq=False)
class SparseTable:
    scope: tuple
    cards: tuple
    entries: dict = field(repr=False)

    def __post_init__(self):
        scope = tuple(self.scope)
        if list(scope) != sorted(scope):
            raise ContractError(f"sparse table scope must be sorted, got {scope}")
        if len(set(scope)) != len(scope):
            raise ContractError(f"duplicate variables in scope {scope}")
        entries = {}
        for t, v in self.entries.items():
            t = tuple(t)
            if v < 0 or not math.isfinite(v):
                raise ContractError(f"entry {t} has invalid value {v}")
            if v > 0:
                entries[t] = float(v)
        object.__setattr__(self, "scope", scope)
        object.__setattr__(self, "cards", tuple(self.cards))
        object.__setattr__(self, "entries", entries)

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, t):
        return self.entries.get(tuple(t), 0.0)

    @property
    def card_map(self):
        return dict(zip(self.scope, self.cards))

    def support(self):
        return SupportRelation(self.scope, self.cards, frozenset(self.entries))

    def total(self):
        return math.fsum(self.entries.values())

    def scale(self, c):
        return SparseTable(self.scope, self.cards, {t: v * c for t, v in self.entries.items()})

    def map_values(self, fn):
        return SparseTable(self.scope, self.cards, {t: fn(v) for t, v in self.entries.items()})


def sparse_from_dense(f: DenseFactor) -> SparseTable:
    tick("sparse_visits", f.values.size)
    if not f.scope:
        return SparseTable((), (), {(): float(f.values)})
    nz = np.nonzero(f.values)
    keys = zip(*(a.tolist() for a in nz))
    return SparseTable(f.scope, f.cards, dict(zip(keys, f.values[nz].tolist())))


def sparse_to_dense(t: SparseTable) -> DenseFactor:
    out = np.zeros(t.cards)
    for k, v in t.entries.items():
        out[k] = v
    return DenseFactor(t.scope, t.cards, out)


def _merged_scope(a, b):
    cm = a.card_map
    for v, c in b.card_map.items():
        if cm.setdefault(v, c) != c:
            raise ContractError(f"variable {v} has inconsistent cardinalities")
    scope = tuple(sorted(cm))
    return scope, tuple(cm[v] for v in scope)


def sparse_product(a: SparseTable, b: SparseTable) -> SparseTable:
    """Hash join: index the smaller operand on the shared variables, probe with the larger."""
    scope, cards = _merged_scope(a, b)
    small, large = (a, b) if len(a) <= len(b) else (b, a)
    shared = [v for v in small.scope if v in set(large.scope)]
    s_key = [small.scope.index(v) for v in shared]
    l_key = [large.scope.index(v) for v in shared]
    index = {}
    for t, v in small.entries.items():
        index.setdefault(tuple(t[i] for i in s_key), []).append((t, v))
    # output position of each variable: taken from the large tuple if present, else small
    l_pos = {v: i for i, v in enumerate(large.scope)}
    s_pos = {v: i for i, v in enumerate(small.scope)}
    take = [(0, l_pos[v]) if v in l_pos else (1, s_pos[v]) for v in scope]
    out = {}
    for t, v in large.entries.items():
        for st, sv in index.get(tuple(t[i] for i in l_key), ()):
            src = (t, st)
            out[tuple(src[w][i] for w, i in take)] = v * sv
    tick("sparse_visits", len(a) + len(b) + len(out))
    return SparseTable(scope, cards, out)


def sparse_sum_out(t: SparseTable, variables: Iterable[int]) -> SparseTable:
    variables = set(variables)
    if not variables <= set(t.scope):
        raise ContractError(
            f"cannot sum out {sorted(variables - set(t.scope))}: not in scope {t.scope}"
        )
    if not variables:
        return t
    keep = [i for i, v in enumerate(t.scope) if v not in variables]
    out = {}
    for k, v in t.entries.items():
        key = tuple(k[i] for i in keep)
        out[key] = out.get(key, 0.0) + v
    tick("sparse_visits", len(t) + len(out))
    return SparseTable(tuple(t.scope[i] for i in keep), tuple(t.cards[i] for i in keep), out)


def sparse_marginalize(t: SparseTable, keep: Iterable[int]) -> SparseTable:
    keep = set(keep)
    return sparse_sum_out(t, [v for v in t.scope if v not in keep])


def sparse_divide(a: SparseTable, b: SparseTable) -> SparseTable:
    if not set(b.scope) <= set(a.scope):
        raise ContractError(f"divisor scope {b.scope} not within {a.scope}")
    idx = [a.scope.index(v) for v in b.scope]
    out = {}
    for k, v in a.entries.items():
        d = b.entries.get(tuple(k[i] for i in idx))
        if d is None:
            raise DivisionSupportError(f"entry {k} has no divisor entry in scope {b.scope}")
        out[k] = v / d
    tick("sparse_visits", len(a) + len(out))
    return SparseTable(a.scope, a.cards, out)


def sparse_add(a: SparseTable, b: SparseTable, wa=1.0, wb=1.0) -> SparseTable:
    """Weighted pointwise sum ``wa*a + wb*b`` over identical scopes."""
    if a.scope != b.scope:
        raise ContractError("sparse_add needs identical scopes")
    out = {k: wa * v for k, v in a.entries.items()}
    for k, v in b.entries.items():
        out[k] = out.get(k, 0.0) + wb * v
    tick("sparse_visits", len(a) + len(b))
    return SparseTable(a.scope, a.cards, out)


def sparse_lossy_project(phi: SparseTable, support: SupportRelation) -> SparseTable:
    """Keep ``phi`` on the support tuples and drop everything else.

    Each support tuple is a conjunctive feature whose solution set is the
    tuple itself, so the feature mean is just ``phi`` at that tuple.
    """
    if support.scope != phi.scope:
        raise ContractError(f"support scope {support.scope} != table scope {phi.scope}")
    if len(support) < len(phi):
        out = {t: phi.entries[t] for t in support.tuples if t in phi.entries}
    else:
        out = {t: v for t, v in phi.entries.items() if t in support.tuples}
    tick("sparse_visits", min(len(support), len(phi)) + len(out))
    return SparseTable(phi.scope, phi.cards, out)


def sparse_indicator(support: SupportRelation) -> SparseTable:
    return SparseTable(support.scope, support.cards, dict.fromkeys(support.tuples, 1.0))
