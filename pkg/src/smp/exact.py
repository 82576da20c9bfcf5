"""Ground truth: two-pass junction-tree marginals and brute-force enumeration."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cluster_graph import DEFAULT_WIDTH_CAP, build_junction_tree, min_fill_order
from .factor import (
    DEFAULT_ENUMERATION_CAP,
    DenseFactor,
    GraphicalModel,
    factor_marginalize,
    factor_product,
    joint_table,
)


@dataclass
class ExactResult:
    marginals: list = field(repr=False)   # one probability vector per variable, or None
    z: float
    log_z: float
    width: int
    defined: bool = True


def _undefined(model, width):
    return ExactResult([None] * model.n, 0.0, -math.inf, width, defined=False)


def exact_marginals(model: GraphicalModel, width_cap: int = DEFAULT_WIDTH_CAP) -> ExactResult:
    jt = build_junction_tree(model, width_cap)
    _, width = min_fill_order(model)
    adj = jt.adjacency()
    pots = []
    for i, lab in enumerate(jt.labels):
        scope = tuple(sorted(lab))
        pot = DenseFactor.constant(1.0, scope, [model.cards[v] for v in scope])
        for j in jt.factors_at(i):
            pot = factor_product(pot, model.factors[j])
        pots.append(pot)

    msgs = {}
    log_z = 0.0
    roots, seen = [], set()
    for i, c in enumerate(jt.components()):
        if c not in seen:
            seen.add(c)
            roots.append(i)
    for root in roots:
        order, parent = [], {root: None}
        stack = [root]
        while stack:
            u = stack.pop()
            order.append(u)
            for w in adj[u]:
                if w not in parent:
                    parent[w] = u
                    stack.append(w)
        for u in reversed(order):
            p = parent[u]
            if p is None:
                continue
            belief = pots[u]
            for w in adj[u]:
                if w != p:
                    belief = factor_product(belief, msgs[(w, u)])
            m = factor_marginalize(belief, jt.edge_label(u, p))
            total = m.values.sum()
            if total <= 0:
                return _undefined(model, width)
            log_z += math.log(total)
            msgs[(u, p)] = DenseFactor(m.scope, m.cards, m.values / total)
        rb = pots[root]
        for w in adj[root]:
            rb = factor_product(rb, msgs[(w, root)])
        total = rb.values.sum()
        if total <= 0:
            return _undefined(model, width)
        log_z += math.log(total)
        for u in order:
            for w in adj[u]:
                if w == parent[u]:
                    continue
                belief = pots[u]
                for x in adj[u]:
                    if x != w:
                        belief = factor_product(belief, msgs[(x, u)])
                m = factor_marginalize(belief, jt.edge_label(u, w))
                msgs[(u, w)] = DenseFactor(m.scope, m.cards, m.values / m.values.sum())

    marginals = []
    for v in range(model.n):
        host = min(
            (i for i, lab in enumerate(jt.labels) if v in lab),
            key=lambda i: (len(jt.labels[i]), i),
        )
        belief = pots[host]
        for w in adj[host]:
            belief = factor_product(belief, msgs[(w, host)])
        mv = factor_marginalize(belief, [v]).values
        marginals.append(mv / mv.sum())
    return ExactResult(marginals, math.exp(log_z) if log_z < 709 else math.inf, log_z, width)


def bruteforce_marginals(model: GraphicalModel, cap: int = DEFAULT_ENUMERATION_CAP) -> ExactResult:
    joint = joint_table(model, cap)
    z = float(joint.sum())
    if z <= 0:
        return _undefined(model, -1)
    marginals = []
    for v in range(model.n):
        axes = tuple(a for a in range(model.n) if a != v)
        mv = joint.sum(axis=axes)
        marginals.append(mv / mv.sum())
    return ExactResult(marginals, z, math.log(z), -1)
