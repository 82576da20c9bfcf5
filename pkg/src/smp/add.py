"""Reduced, ordered algebraic decision diagrams over multi-valued variables.

Decision nodes carry one child per domain value.  All nodes live in an
:class:`AddManager`, which hash-conses them through a unique table, so two
diagrams built in the same manager denote the same function (over the same
order) exactly when their root ids are equal.

Nodes are plain integers.  Terminals are interned by the bit pattern of
their value; merging of *nearby* values only happens in :func:`add_quantize`.
"""
from __future__ import annotations

import math
import operator
from collections import Counter
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import ContractError, DivisionSupportError
from .factor import DenseFactor
from .quantize import quantization_map
from .work import tick

_TERMINAL = -1


class AddManager:
    """Node store shared by every diagram combined in one computation.

    Not thread-safe; give each inference run its own manager.
    """

    def __init__(self, cards, order):
        self.cards = dict(enumerate(cards)) if not isinstance(cards, dict) else dict(cards)
        self.order = tuple(order)
        if len(set(self.order)) != len(self.order):
            raise ContractError("variable order repeats a variable")
        missing = set(self.order) - set(self.cards)
        if missing:
            raise ContractError(f"order mentions variables without cardinality: {missing}")
        self.level = {v: i for i, v in enumerate(self.order)}
        self._var = []
        self._kids = []
        self._val = []
        self._unique = {}
        self._terminals = {}

    def __len__(self):
        return len(self._var)

    def terminal(self, value):
        value = float(value) + 0.0  # folds -0.0 into 0.0
        node = self._terminals.get(value)
        if node is None:
            node = len(self._var)
            self._var.append(_TERMINAL)
            self._kids.append(())
            self._val.append(value)
            self._terminals[value] = node
        return node

    def mk(self, var, kids):
        kids = tuple(kids)
        if len(kids) != self.cards[var]:
            raise ContractError(f"node on {var} needs {self.cards[var]} children")
        first = kids[0]
        if all(k == first for k in kids):
            return first
        key = (var, kids)
        node = self._unique.get(key)
        if node is None:
            lv = self.level[var]
            for k in kids:
                if self.node_level(k) <= lv:
                    raise ContractError("child tests a variable not below its parent")
            node = len(self._var)
            self._var.append(var)
            self._kids.append(kids)
            self._val.append(math.nan)
            self._unique[key] = node
        return node

    def is_terminal(self, node):
        return self._var[node] == _TERMINAL

    def var(self, node):
        return self._var[node]

    def kids(self, node):
        return self._kids[node]

    def value(self, node):
        return self._val[node]

    def node_level(self, node):
        v = self._var[node]
        return math.inf if v == _TERMINAL else self.level[v]

    def sorted_by_level(self, variables):
        return sorted(variables, key=self.level.__getitem__)


@dataclass(frozen=True)
class Add:
    """A diagram rooted at ``root`` denoting a function over ``scope``."""

    manager: AddManager
    root: int
    scope: tuple

    @property
    def cards(self):
        return tuple(self.manager.cards[v] for v in self.scope)

    def nodes(self):
        return reachable(self.manager, self.root)

    def terminal_values(self):
        m = self.manager
        return sorted(m.value(n) for n in self.nodes() if m.is_terminal(n))

    def decision_count(self):
        m = self.manager
        return sum(1 for n in self.nodes() if not m.is_terminal(n))

    def __len__(self):
        return len(self.nodes())


def reachable(m: AddManager, root: int):
    seen = {root}
    stack = [root]
    while stack:
        n = stack.pop()
        for k in m.kids(n):
            if k not in seen:
                seen.add(k)
                stack.append(k)
    return seen


def _check_scope(m, scope):
    scope = tuple(sorted(scope))
    for v in scope:
        if v not in m.level:
            raise ContractError(f"variable {v} is not in the manager's order")
    return scope


def add_constant(m: AddManager, value, scope=()):
    return Add(m, m.terminal(value), _check_scope(m, scope))


def add_from_dense(f: DenseFactor, m: AddManager) -> Add:
    scope = _check_scope(m, f.scope)
    by_level = m.sorted_by_level(f.scope)
    arr = f.values.transpose([f.scope.index(v) for v in by_level])

    def build(a, depth):
        if depth == len(by_level):
            return m.terminal(a)
        var = by_level[depth]
        return m.mk(var, [build(a[i], depth + 1) for i in range(m.cards[var])])

    return Add(m, build(arr, 0), scope)


def add_to_dense(d: Add) -> DenseFactor:
    m = d.manager
    by_level = m.sorted_by_level(d.scope)
    cards = [m.cards[v] for v in by_level]
    memo = {}

    def dense(node, depth):
        key = (node, depth)
        if key in memo:
            return memo[key]
        if depth == len(by_level):
            out = np.asarray(m.value(node))
        elif m.var(node) == by_level[depth]:
            out = np.stack([dense(k, depth + 1) for k in m.kids(node)])
        else:
            below = dense(node, depth + 1)
            out = np.broadcast_to(below, (cards[depth],) + below.shape)
        memo[key] = out
        return out

    sset = set(d.scope)
    if any(not m.is_terminal(n) and m.var(n) not in sset for n in d.nodes()):
        raise ContractError("diagram tests variables outside its scope")
    arr = dense(d.root, 0)
    perm = [by_level.index(v) for v in d.scope]
    return DenseFactor(d.scope, [m.cards[v] for v in d.scope], arr.transpose(perm))


def add_evaluate(d: Add, x) -> float:
    """Follow the path selected by ``x`` (a sequence or mapping indexed by variable)."""
    m = d.manager
    node = d.root
    while not m.is_terminal(node):
        node = m.kids(node)[x[m.var(node)]]
    return m.value(node)


def _div(a, b):
    if b == 0.0:
        if a == 0.0:
            return 0.0
        raise DivisionSupportError(f"division of {a} by zero terminal")
    return a / b


_OPS = {
    "mul": operator.mul,
    "add": operator.add,
    "div": _div,
    "sub": operator.sub,
    "max": max,
}
_COMMUTATIVE = {"mul", "add", "max"}


def _apply(m: AddManager, op: str, a: int, b: int, cache: dict) -> int:
    if op in _COMMUTATIVE and b < a:
        a, b = b, a
    key = (a, b)
    hit = cache.get(key)
    if hit is not None:
        return hit
    ta, tb = m.is_terminal(a), m.is_terminal(b)
    if ta and tb:
        out = m.terminal(_OPS[op](m.value(a), m.value(b)))
    elif op == "mul" and ((ta and m.value(a) == 0.0) or (tb and m.value(b) == 0.0)):
        out = m.terminal(0.0)
    elif op == "mul" and ta and m.value(a) == 1.0:
        out = b
    elif op == "mul" and tb and m.value(b) == 1.0:
        out = a
    elif op == "div" and ta and m.value(a) == 0.0:
        out = a
    else:
        la, lb = m.node_level(a), m.node_level(b)
        top = min(la, lb)
        var = m.order[top]
        card = m.cards[var]
        ka = m.kids(a) if la == top else (a,) * card
        kb = m.kids(b) if lb == top else (b,) * card
        out = m.mk(var, [_apply(m, op, x, y, cache) for x, y in zip(ka, kb)])
    tick("add_nodes", 1)
    cache[key] = out
    return out


def add_apply(op: str, a: Add, b: Add) -> Add:
    if a.manager is not b.manager:
        raise ContractError("diagrams belong to different managers")
    scope = tuple(sorted(set(a.scope) | set(b.scope)))
    return Add(a.manager, _apply(a.manager, op, a.root, b.root, {}), scope)


def add_apply_product(a: Add, b: Add) -> Add:
    return add_apply("mul", a, b)


def add_apply_divide(a: Add, b: Add) -> Add:
    """Pointwise ``a / b`` with 0/0 = 0; positive over zero raises."""
    return add_apply("div", a, b)


def add_plus(a: Add, b: Add) -> Add:
    return add_apply("add", a, b)


def add_scale(d: Add, c: float) -> Add:
    return add_apply("mul", d, add_constant(d.manager, c))


def add_sum_out(d: Add, variables: Iterable[int]) -> Add:
    m = d.manager
    variables = m.sorted_by_level(_check_scope(m, variables))
    root = d.root
    for v in reversed(variables):
        lv = m.level[v]
        card = m.cards[v]
        memo = {}
        plus_cache = {}
        mul_cache = {}
        factor = m.terminal(card)

        def rec(n):
            hit = memo.get(n)
            if hit is not None:
                return hit
            if m.node_level(n) > lv:
                out = _apply(m, "mul", n, factor, mul_cache)
            elif m.var(n) == v:
                kids = m.kids(n)
                out = kids[0]
                for k in kids[1:]:
                    out = _apply(m, "add", out, k, plus_cache)
            else:
                out = m.mk(m.var(n), [rec(k) for k in m.kids(n)])
            memo[n] = out
            return out

        root = rec(root)
    scope = tuple(v for v in d.scope if v not in set(variables))
    return Add(m, root, scope)


def add_marginalize(d: Add, keep: Iterable[int]) -> Add:
    keep = set(keep)
    return add_sum_out(d, [v for v in d.scope if v not in keep])


def _multiplier(m, levels_cards, lo, hi):
    """Product of cardinalities of scope variables with level strictly in (lo, hi)."""
    out = 1
    for lv, c in levels_cards:
        if lo < lv < hi:
            out *= c
    return out


def leaf_model_counts(d: Add, scope=None) -> dict:
    """Number of complete scope assignments reaching each terminal value."""
    m = d.manager
    scope = d.scope if scope is None else _check_scope(m, scope)
    sset = set(scope)
    for n in d.nodes():
        if not m.is_terminal(n) and m.var(n) not in sset:
            raise ContractError(f"scope {scope} misses tested variable {m.var(n)}")
    lc = sorted((m.level[v], m.cards[v]) for v in scope)
    memo = {}

    def counts(n):
        hit = memo.get(n)
        if hit is not None:
            return hit
        if m.is_terminal(n):
            out = Counter({m.value(n): 1})
        else:
            out = Counter()
            ln = m.node_level(n)
            for k in m.kids(n):
                mult = _multiplier(m, lc, ln, m.node_level(k))
                for val, c in counts(k).items():
                    out[val] += c * mult
        memo[n] = out
        return out

    top = _multiplier(m, lc, -1, m.node_level(d.root))
    return {val: c * top for val, c in counts(d.root).items()}


def leaf_model_count(d: Add, value: float, scope=None) -> int:
    return leaf_model_counts(d, scope).get(float(value), 0)


def map_terminals(d: Add, fn) -> Add:
    """Rebuild ``d`` with each terminal value replaced by ``fn(value)`` (re-reduced)."""
    m = d.manager
    memo = {}

    def rec(n):
        hit = memo.get(n)
        if hit is not None:
            return hit
        if m.is_terminal(n):
            out = m.terminal(fn(m.value(n)))
        else:
            out = m.mk(m.var(n), [rec(k) for k in m.kids(n)])
        memo[n] = out
        return out

    return Add(m, rec(d.root), d.scope)


def _region_sums(phi: Add, structure: Add):
    """Sum of ``phi`` over each structure terminal's solution set, in one joint pass."""
    m = structure.manager
    by_level = m.sorted_by_level(structure.scope)
    memo = {}

    def rec(i, s, p):
        key = (i, s, p)
        hit = memo.get(key)
        if hit is not None:
            return hit
        if i == len(by_level):
            out = {m.value(s): m.value(p)}
        else:
            var = by_level[i]
            card = m.cards[var]
            ks = m.kids(s) if m.var(s) == var else (s,) * card
            kp = m.kids(p) if m.var(p) == var else (p,) * card
            out = {}
            for x, y in zip(ks, kp):
                for val, tot in rec(i + 1, x, y).items():
                    out[val] = out.get(val, 0.0) + tot
        memo[key] = out
        return out

    return rec(0, structure.root, phi.root)


def add_lossy_project(phi, structure: Add) -> Add:
    """Replace every nonzero terminal of ``structure`` by the mean of ``phi`` over its paths.

    Zero terminals stay zero.  Among all diagrams sharing the structure's
    leaf partition, this choice minimizes KL(phi || result).
    """
    m = structure.manager
    if isinstance(phi, DenseFactor):
        phi = add_from_dense(phi, m)
    if phi.manager is not m:
        raise ContractError("diagrams belong to different managers")
    if tuple(phi.scope) != tuple(structure.scope):
        raise ContractError(f"scopes differ: {phi.scope} vs {structure.scope}")
    sums = _region_sums(phi, structure)
    counts = leaf_model_counts(structure)
    means = {v: (sums[v] / counts[v] if v != 0.0 else 0.0) for v in counts}
    return map_terminals(structure, means.__getitem__)


def add_quantize(d: Add, eps: float) -> Add:
    if eps < 0:
        raise ContractError("eps must be >= 0")
    if eps == 0:
        return d
    mapping = quantization_map(d.terminal_values(), eps)
    return map_terminals(d, lambda v: mapping.get(v, v))


def add_indicator(mask: np.ndarray, scope, m: AddManager) -> Add:
    """0/1 diagram over ``scope`` from a boolean array whose axes follow sorted scope."""
    scope = tuple(sorted(scope))
    return add_from_dense(
        DenseFactor(scope, [m.cards[v] for v in scope], mask.astype(float)), m
    )


def add_total(d: Add) -> float:
    """Sum of the function over its scope."""
    return math.fsum(v * c for v, c in leaf_model_counts(d).items())


def add_max_abs_diff(a: Add, b: Add) -> float:
    m = a.manager
    diff = add_apply("sub", a, b)
    return max(abs(m.value(n)) for n in diff.nodes() if m.is_terminal(n))


def check_reduced(d: Add):
    """Return a list of reducedness/ordering violations (empty when canonical)."""
    m = d.manager
    problems = []
    seen_keys = {}
    seen_vals = {}
    for n in sorted(d.nodes()):
        if m.is_terminal(n):
            v = m.value(n)
            if v in seen_vals:
                problems.append(f"terminals {seen_vals[v]} and {n} share value {v}")
            seen_vals[v] = n
            continue
        kids = m.kids(n)
        if all(k == kids[0] for k in kids):
            problems.append(f"node {n} has identical children")
        key = (m.var(n), kids)
        if key in seen_keys:
            problems.append(f"nodes {seen_keys[key]} and {n} are isomorphic")
        seen_keys[key] = n
        for k in kids:
            if m.node_level(k) <= m.node_level(n):
                problems.append(f"edge {n}->{k} violates the variable order")
    return problems


def to_dot(d: Add, names=None) -> str:
    m = d.manager
    names = names or {}
    lines = ["digraph add {"]
    for n in sorted(d.nodes()):
        if m.is_terminal(n):
            lines.append(f'  n{n} [shape=box,label="{m.value(n):.6g}"];')
        else:
            v = m.var(n)
            lines.append(f'  n{n} [label="{names.get(v, f"X{v}")}"];')
            for val, k in enumerate(m.kids(n)):
                lines.append(f'  n{n} -> n{k} [label="{val}"];')
    lines.append("}")
    return "\n".join(lines)
