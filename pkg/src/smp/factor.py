"""Discrete graphical models and dense table algebra.

Every :class:`DenseFactor` keeps its scope sorted by variable index and its
table as an n-d array whose axes follow that scope, so the flattened values
are row-major with the last (highest-index) variable fastest.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    ContractError,
    DivisionSupportError,
    EnumerationCapError,
    NormalizationError,
)
from .work import tick

DEFAULT_ENUMERATION_CAP = 2**24


@dataclass(frozen=True)
class Variable:
    index: int
    cardinality: int

    def __post_init__(self):
        if self.cardinality < 2:
            raise ContractError(f"variable {self.index}: cardinality must be >= 2")


@dataclass(frozen=True, eq=False)
class DenseFactor:
    scope: tuple
    cards: tuple
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        scope = tuple(int(v) for v in self.scope)
        cards = tuple(int(c) for c in self.cards)
        values = np.array(self.values, dtype=float)
        if len(scope) != len(cards):
            raise ContractError("scope and cards differ in length")
        if len(set(scope)) != len(scope):
            raise ContractError(f"duplicate variables in scope {scope}")
        if values.size != math.prod(cards):
            raise ContractError(
                f"table has {values.size} entries, scope needs {math.prod(cards)}"
            )
        values = values.reshape(cards)
        if list(scope) != sorted(scope):
            perm = sorted(range(len(scope)), key=scope.__getitem__)
            values = values.transpose(perm)
            scope = tuple(scope[p] for p in perm)
            cards = tuple(cards[p] for p in perm)
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ContractError("factor values must be finite and nonnegative")
        values = np.array(values, order="C")
        values.setflags(write=False)
        object.__setattr__(self, "scope", scope)
        object.__setattr__(self, "cards", cards)
        object.__setattr__(self, "values", values)

    @classmethod
    def _trusted(cls, scope, cards, values):
        """Skip validation for results of operations on already-valid factors."""
        f = object.__new__(cls)
        values = np.array(values, dtype=float, order="C").reshape(cards)
        values.setflags(write=False)
        object.__setattr__(f, "scope", scope)
        object.__setattr__(f, "cards", cards)
        object.__setattr__(f, "values", values)
        return f

    @classmethod
    def constant(cls, value, scope=(), cards=()):
        return cls(scope, cards, np.full(math.prod(cards), float(value)))

    @property
    def flat(self):
        return self.values.ravel()

    @property
    def card_map(self):
        return dict(zip(self.scope, self.cards))

    def __len__(self):
        return self.values.size

    def __call__(self, assignment):
        """Value at a full assignment (indexable by variable index) or a dict."""
        return float(self.values[tuple(assignment[v] for v in self.scope)])

    def expand(self, scope, cards):
        """Broadcast view of the table over a sorted superset scope."""
        shape = [1] * len(scope)
        pos = {v: i for i, v in enumerate(scope)}
        for v, c in zip(self.scope, self.cards):
            shape[pos[v]] = c
        return self.values.reshape(shape)

    def allclose(self, other, atol=1e-12):
        return (
            self.scope == other.scope
            and np.allclose(self.values, other.values, rtol=0, atol=atol)
        )


def _union(f, g):
    cm = f.card_map
    for v, c in g.card_map.items():
        if cm.setdefault(v, c) != c:
            raise ContractError(f"variable {v} has inconsistent cardinalities")
    scope = tuple(sorted(cm))
    return scope, tuple(cm[v] for v in scope)


def factor_product(f: DenseFactor, g: DenseFactor) -> DenseFactor:
    scope, cards = _union(f, g)
    out = f.expand(scope, cards) * g.expand(scope, cards)
    out = np.broadcast_to(out, cards)
    tick("dense_cells", f.values.size + g.values.size + out.size)
    return DenseFactor._trusted(scope, cards, out)


def factor_sum_out(f: DenseFactor, variables: Iterable[int]) -> DenseFactor:
    variables = set(variables)
    if not variables <= set(f.scope):
        raise ContractError(
            f"cannot sum out {sorted(variables - set(f.scope))}: not in scope {f.scope}"
        )
    if not variables:
        return f
    axes = tuple(i for i, v in enumerate(f.scope) if v in variables)
    keep = [i for i in range(len(f.scope)) if i not in axes]
    out = f.values.sum(axis=axes)
    tick("dense_cells", f.values.size + out.size)
    return DenseFactor._trusted(
        tuple(f.scope[i] for i in keep), tuple(f.cards[i] for i in keep), out
    )


def factor_marginalize(f: DenseFactor, keep: Iterable[int]) -> DenseFactor:
    keep = set(keep)
    return factor_sum_out(f, [v for v in f.scope if v not in keep])


def factor_divide(f: DenseFactor, g: DenseFactor) -> DenseFactor:
    """Pointwise quotient with 0/0 = 0; scope(g) must be a subset of scope(f)."""
    if not set(g.scope) <= set(f.scope):
        raise ContractError(f"divisor scope {g.scope} not within {f.scope}")
    num = f.values
    den = np.broadcast_to(g.expand(f.scope, f.cards), f.cards)
    bad = (num > 0) & (den == 0)
    if bad.any():
        idx = int(np.flatnonzero(bad.ravel())[0])
        raise DivisionSupportError(f"numerator positive over zero divisor at index {idx}")
    out = np.divide(num, den, out=np.zeros(f.cards), where=den != 0)
    tick("dense_cells", f.values.size + g.values.size + out.size)
    return DenseFactor._trusted(f.scope, f.cards, out)


def normalize(f: DenseFactor) -> DenseFactor:
    total = f.values.sum()
    if not total > 0:
        raise NormalizationError("cannot normalize a factor whose values sum to 0")
    return DenseFactor(f.scope, f.cards, f.values / total)


def kl_divergence(p: DenseFactor, q: DenseFactor) -> float:
    """KL(p || q) between the normalized tables; ``math.inf`` on support violation."""
    if p.scope != q.scope:
        raise ContractError(f"KL scopes differ: {p.scope} vs {q.scope}")
    pn = normalize(p).flat
    qn = normalize(q).flat
    mask = pn > 0
    if np.any(qn[mask] == 0):
        return math.inf
    return float(max(0.0, np.sum(pn[mask] * np.log(pn[mask] / qn[mask]))))


@dataclass(frozen=True, eq=False)
class GraphicalModel:
    cards: tuple
    factors: tuple

    def __post_init__(self):
        cards = tuple(int(c) for c in self.cards)
        if not cards:
            raise ContractError("model has no variables")
        for i, c in enumerate(cards):
            Variable(i, c)
        factors = tuple(self.factors)
        for f in factors:
            for v, c in zip(f.scope, f.cards):
                if not 0 <= v < len(cards):
                    raise ContractError(f"factor references unknown variable {v}")
                if cards[v] != c:
                    raise ContractError(f"factor disagrees on cardinality of {v}")
        object.__setattr__(self, "cards", cards)
        object.__setattr__(self, "factors", factors)

    @property
    def n(self):
        return len(self.cards)

    @property
    def variables(self):
        return [Variable(i, c) for i, c in enumerate(self.cards)]

    def num_configurations(self):
        return math.prod(self.cards)

    def zero_fraction(self):
        total = sum(f.values.size for f in self.factors)
        zeros = sum(int(np.count_nonzero(f.values == 0)) for f in self.factors)
        return zeros / total if total else 0.0

    def with_evidence(self, evidence):
        """Absorb ``{variable: value}`` by zeroing inconsistent table entries."""
        factors = []
        for f in self.factors:
            vals = np.array(f.values)
            for v, x in evidence.items():
                if v in f.scope:
                    ax = f.scope.index(v)
                    sl = [slice(None)] * len(f.scope)
                    for other in range(f.cards[ax]):
                        if other != x:
                            sl[ax] = other
                            vals[tuple(sl)] = 0.0
            factors.append(DenseFactor(f.scope, f.cards, vals))
        for v, x in evidence.items():
            if not any(v in f.scope for f in self.factors):
                ind = np.zeros(self.cards[v])
                ind[x] = 1.0
                factors.append(DenseFactor((v,), (self.cards[v],), ind))
        return GraphicalModel(self.cards, factors)


def check_assignment(model: GraphicalModel, x: Sequence[int]):
    if len(x) != model.n:
        raise ContractError(f"assignment has {len(x)} values, model has {model.n}")
    for i, (xi, c) in enumerate(zip(x, model.cards)):
        if not 0 <= xi < c:
            raise ContractError(f"value {xi} outside domain of variable {i}")


def evaluate_unnormalized(model: GraphicalModel, x: Sequence[int]) -> float:
    check_assignment(model, x)
    out = 1.0
    for f in model.factors:
        out *= f(x)
    return out


def joint_table(model: GraphicalModel, cap: int = DEFAULT_ENUMERATION_CAP) -> np.ndarray:
    """The full unnormalized joint as an n-d array (variable order = index order)."""
    size = model.num_configurations()
    if size > cap:
        raise EnumerationCapError(f"{size} configurations exceed the cap of {cap}")
    scope = tuple(range(model.n))
    joint = np.ones(model.cards)
    for f in model.factors:
        joint = joint * f.expand(scope, model.cards)
    return np.broadcast_to(joint, model.cards)


def partition_bruteforce(model: GraphicalModel, cap: int = DEFAULT_ENUMERATION_CAP) -> float:
    return float(joint_table(model, cap).sum())


def iter_assignments(cards):
    return itertools.product(*(range(c) for c in cards))
