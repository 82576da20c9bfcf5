"""Structured message passing over cluster graphs.

Every vertex and edge of a cluster graph carries a function held in one
representation (dense table, sparse table or ADD).  With a sample set, each
vertex/edge is restricted to the projection of the samples on its scope, so
messages become exactly zero outside that support; quantization with
``epsilon`` merges nearby message values.  Without samples and with
``epsilon == 0`` the engine is plain cluster-graph belief propagation.
"""
from __future__ import annotations

import enum
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import add as addmod
from .cluster_graph import ClusterGraph, JoinGraphParams, build_join_graph, min_fill_order
from .errors import ContractError, EmptyBeliefError, SMPError, SupportStarvationError
from .factor import DenseFactor, GraphicalModel, factor_divide, factor_marginalize, factor_product
from .quantize import quantization_map, quantize_array
from .sampling import SampleSet, SamplerConfig, augment_support, generate_samples, project_samples
from .sparse import (
    SparseTable,
    SupportRelation,
    sparse_add,
    sparse_divide,
    sparse_from_dense,
    sparse_indicator,
    sparse_lossy_project,
    sparse_marginalize,
    sparse_product,
    sparse_to_dense,
)
from .work import metered, tick

log = logging.getLogger(__name__)


class ReprKind(str, enum.Enum):
    DENSE = "dense"
    SPARSE = "sparse"
    ADD = "add"


@dataclass(frozen=True)
class EngineConfig:
    epsilon: float = 0.0
    schedule: str = "sum_product"
    max_iterations: int = 100
    tolerance: float = 1e-6
    damping: float = 0.0
    augment_support: bool = True
    time_limit_ms: float | None = None
    audit: bool = False

    def __post_init__(self):
        if self.epsilon < 0:
            raise ContractError("epsilon must be >= 0")
        if self.schedule not in ("sum_product", "belief_update"):
            raise ContractError(f"unknown schedule {self.schedule!r}")
        if not 0 <= self.damping < 1:
            raise ContractError("damping must lie in [0, 1)")
        if self.max_iterations < 1:
            raise ContractError("max_iterations must be >= 1")


# --------------------------------------------------------------------------
# representation backends


class DenseBackend:
    kind = ReprKind.DENSE

    def __init__(self, model):
        self.cards = model.cards
        self._axes = {}

    def from_dense(self, f):
        return f

    def to_dense(self, r):
        return r

    def ones(self, scope):
        return DenseFactor.constant(1.0, scope, [self.cards[v] for v in scope])

    def support_object(self, support):
        return DenseFactor(support.scope, support.cards, support.mask())

    def restrict(self, r, supp):
        return factor_product(r, supp)

    def product(self, a, b):
        return factor_product(a, b)

    def marginalize(self, r, keep):
        keep = tuple(keep)
        key = (r.scope, keep)
        axes = self._axes.get(key)
        if axes is None:
            axes = self._axes[key] = tuple(i for i, v in enumerate(r.scope) if v not in keep)
        if not axes:
            return r
        out = r.values.sum(axis=axes)
        tick("dense_cells", r.values.size + out.size)
        rest = tuple(v for v in r.scope if v in keep)
        return DenseFactor._trusted(rest, tuple(self.cards[v] for v in rest), out)

    def finish(self, msg, supp, eps):
        """Restrict, normalize, quantize and renormalize in one pass; None if empty."""
        v = msg.values if supp is None else msg.values * supp.values
        total = v.sum()
        if not total > 0:
            return None
        v = v / total
        if eps > 0:
            q = quantize_array(v, eps)
            if q is not v:
                v = q / q.sum()
        tick("dense_cells", 2 * v.size)
        return DenseFactor._trusted(msg.scope, msg.cards, v)

    def divide(self, a, b):
        return factor_divide(a, b)

    def total(self, r):
        return float(r.values.sum())

    def scale(self, r, c):
        return DenseFactor._trusted(r.scope, r.cards, r.values * c)

    def quantize(self, r, eps):
        out = quantize_array(r.values, eps)
        return r if out is r.values else DenseFactor._trusted(r.scope, r.cards, out)

    def product_all(self, base, factors):
        """Multiply factors whose scopes lie within ``base``'s scope."""
        out = base.values
        for f in factors:
            if not set(f.scope) <= set(base.scope):
                return _fold_product(self, base, factors)
            out = out * f.expand(base.scope, base.cards)
            tick("dense_cells", 2 * out.size + f.values.size)
        return DenseFactor._trusted(base.scope, base.cards, out)

    def mix(self, old, new, lam):
        return DenseFactor._trusted(new.scope, new.cards, lam * old.values + (1 - lam) * new.values)

    def max_abs_diff(self, a, b):
        return float(np.max(np.abs(a.values - b.values))) if a.values.size else 0.0


class SparseBackend:
    kind = ReprKind.SPARSE

    def __init__(self, model):
        self.cards = model.cards

    def from_dense(self, f):
        return sparse_from_dense(f)

    def to_dense(self, r):
        return sparse_to_dense(r)

    def ones(self, scope):
        return sparse_indicator(SupportRelation.full(scope, [self.cards[v] for v in scope]))

    def support_object(self, support):
        return support

    def restrict(self, r, supp):
        return sparse_lossy_project(r, supp)

    def product(self, a, b):
        return sparse_product(a, b)

    def marginalize(self, r, keep):
        return sparse_marginalize(r, keep)

    def divide(self, a, b):
        return sparse_divide(a, b)

    def total(self, r):
        return r.total()

    def scale(self, r, c):
        return r.scale(c)

    def quantize(self, r, eps):
        vals = np.fromiter(r.entries.values(), dtype=float, count=len(r.entries))
        if quantize_array(vals, eps) is vals:
            return r
        mapping = quantization_map(vals.tolist(), eps)
        return r.map_values(mapping.__getitem__)

    def mix(self, old, new, lam):
        return sparse_add(old, new, lam, 1 - lam)

    def max_abs_diff(self, a, b):
        keys = a.entries.keys() | b.entries.keys()
        return max((abs(a[k] - b[k]) for k in keys), default=0.0)


class AddBackend:
    kind = ReprKind.ADD

    def __init__(self, model, order=None):
        if order is None:
            order = min_fill_order(model)[0][::-1]
        self.manager = addmod.AddManager(model.cards, order)

    def from_dense(self, f):
        return addmod.add_from_dense(f, self.manager)

    def to_dense(self, r):
        return addmod.add_to_dense(r)

    def ones(self, scope):
        return addmod.add_constant(self.manager, 1.0, scope)

    def support_object(self, support):
        return addmod.add_indicator(support.mask(), support.scope, self.manager)

    def restrict(self, r, supp):
        return addmod.add_apply_product(r, supp)

    def product(self, a, b):
        return addmod.add_apply_product(a, b)

    def marginalize(self, r, keep):
        return addmod.add_marginalize(r, keep)

    def divide(self, a, b):
        return addmod.add_apply_divide(a, b)

    def total(self, r):
        return addmod.add_total(r)

    def scale(self, r, c):
        return addmod.add_scale(r, c)

    def quantize(self, r, eps):
        return addmod.add_quantize(r, eps)

    def mix(self, old, new, lam):
        return addmod.add_plus(addmod.add_scale(old, lam), addmod.add_scale(new, 1 - lam))

    def max_abs_diff(self, a, b):
        return addmod.add_max_abs_diff(a, b)


def make_backend(kind, model):
    kind = ReprKind(kind)
    if kind is ReprKind.DENSE:
        return DenseBackend(model)
    if kind is ReprKind.SPARSE:
        return SparseBackend(model)
    return AddBackend(model)


# --------------------------------------------------------------------------
# structured cluster graph


@dataclass
class StructuredClusterGraph:
    model: GraphicalModel
    graph: ClusterGraph
    backend: object
    potentials: list
    vertex_support: list                  # SupportRelation per vertex, or None (full)
    edge_support: dict                    # (i, j) with i < j -> SupportRelation or None
    messages: dict                        # (src, dst) -> normalized message
    lossy: bool
    _edge_supp_obj: dict = field(default_factory=dict, repr=False)
    sends: int = 0
    _adj: dict = field(default=None, repr=False)

    @property
    def kind(self):
        return self.backend.kind

    def scope(self, i):
        return tuple(sorted(self.graph.labels[i]))

    def edge_scope(self, i, j):
        return tuple(sorted(self.graph.edge_label(i, j)))

    def directed_edges(self):
        adj = self.graph.adjacency()
        return [(i, j) for i in range(self.graph.num_vertices) for j in adj[i]]

    def belief(self, i, exclude=None, messages=None):
        messages = self.messages if messages is None else messages
        if self._adj is None:
            self._adj = self.graph.adjacency()
        incoming = [messages[(k, i)] for k in self._adj[i] if k != exclude]
        product_all = getattr(self.backend, "product_all", None)
        if product_all is not None:
            return product_all(self.potentials[i], incoming)
        return _fold_product(self.backend, self.potentials[i], incoming)


def _fold_product(backend, base, factors):
    for f in factors:
        base = backend.product(base, f)
    return base


def _support_cards(model, scope):
    return tuple(model.cards[v] for v in scope)


def initialize_scg(
    graph: ClusterGraph,
    samples: SampleSet | None,
    kind,
    model: GraphicalModel,
    augment: bool = True,
) -> StructuredClusterGraph:
    backend = make_backend(kind, model)
    lossy = samples is not None
    vsupp, pots = [], []
    for i, lab in enumerate(graph.labels):
        scope = tuple(sorted(lab))
        supp = None
        if lossy:
            supp = project_samples(samples, scope)
            if augment:
                supp = augment_support(supp, model, graph.factors_at(i), samples)
        pot = backend.ones(scope)
        if supp is not None:
            pot = backend.restrict(pot, backend.support_object(supp))
        for j in graph.factors_at(i):
            pot = backend.product(pot, backend.from_dense(model.factors[j]))
        if backend.total(pot) <= 0:
            raise EmptyBeliefError(i)
        vsupp.append(supp)
        pots.append(pot)
    esupp, eobj, messages = {}, {}, {}
    for (i, j), lab in graph.edges.items():
        scope = tuple(sorted(lab))
        supp = None
        if lossy:
            supp = project_samples(samples, scope)
            if augment:
                supp = supp.union(vsupp[i].project(scope)).union(vsupp[j].project(scope))
            eobj[(i, j)] = backend.support_object(supp)
        esupp[(i, j)] = supp
        init = backend.ones(scope)
        if supp is not None:
            init = backend.restrict(init, eobj[(i, j)])
        init = backend.scale(init, 1.0 / backend.total(init))
        messages[(i, j)] = init
        messages[(j, i)] = init
    return StructuredClusterGraph(model, graph, backend, pots, vsupp, esupp, messages, lossy, eobj)


def _finish_message(scg, msg, i, j, eps):
    """Project on the edge support, normalize, quantize, renormalize."""
    be = scg.backend
    key = (min(i, j), max(i, j))
    finish = getattr(be, "finish", None)
    if finish is not None:
        out = finish(msg, scg._edge_supp_obj[key] if scg.lossy else None, eps)
        if out is None:
            raise SupportStarvationError(i, j)
        return out
    if scg.lossy:
        msg = be.restrict(msg, scg._edge_supp_obj[key])
    total = be.total(msg)
    if not total > 0:
        raise SupportStarvationError(i, j)
    msg = be.scale(msg, 1.0 / total)
    if eps > 0:
        msg = be.quantize(msg, eps)
        msg = be.scale(msg, 1.0 / be.total(msg))
    return msg


def lossless_message(scg, i, j, messages=None):
    """The unprojected sum-product message i -> j (before support restriction)."""
    prod = scg.belief(i, exclude=j, messages=messages)
    return scg.backend.marginalize(prod, scg.edge_scope(i, j))


def compute_message(scg, i, j, config: EngineConfig = EngineConfig(), messages=None):
    messages = scg.messages if messages is None else messages
    be = scg.backend
    if config.schedule == "sum_product":
        raw = lossless_message(scg, i, j, messages)
        out = _finish_message(scg, raw, i, j, config.epsilon)
    else:
        marg = be.marginalize(scg.belief(i, messages=messages), scg.edge_scope(i, j))
        sigma = _finish_message(scg, marg, i, j, config.epsilon)
        out = be.divide(sigma, messages[(j, i)])
        total = be.total(out)
        if not total > 0:
            raise SupportStarvationError(i, j)
        out = be.scale(out, 1.0 / total)
    scg.sends += 1
    if config.audit:
        audit_message(scg, i, j, out)
    return out


def audit_message(scg, i, j, msg):
    d = scg.backend.to_dense(msg)
    if abs(d.values.sum() - 1.0) > 1e-12:
        raise AssertionError(f"message {i}->{j} sums to {d.values.sum()!r}")
    supp = scg.edge_support[(min(i, j), max(i, j))]
    if supp is not None and np.any(d.values[~supp.mask()] != 0):
        raise AssertionError(f"message {i}->{j} is nonzero outside its support")


def _tree_schedule(graph: ClusterGraph):
    """Directed edges in collect-then-distribute order for each tree component."""
    adj = graph.adjacency()
    seen = set()
    schedule = []
    for root in range(graph.num_vertices):
        if root in seen:
            continue
        order, parent = [], {root: None}
        stack = [root]
        while stack:
            u = stack.pop()
            order.append(u)
            for w in adj[u]:
                if w not in parent:
                    parent[w] = u
                    stack.append(w)
        seen.update(order)
        up = [(u, parent[u]) for u in reversed(order) if parent[u] is not None]
        down = [(parent[u], u) for u in order if parent[u] is not None]
        schedule.extend(up + down)
    return schedule


@dataclass
class PropagationResult:
    converged: bool
    iterations: int
    sends: int
    max_change: float


def run_propagation(scg: StructuredClusterGraph, config: EngineConfig = EngineConfig()):
    start = time.perf_counter()
    be = scg.backend
    if scg.graph.is_forest() and config.damping == 0:
        for i, j in _tree_schedule(scg.graph):
            scg.messages[(i, j)] = compute_message(scg, i, j, config)
        return PropagationResult(True, 1, scg.sends, 0.0)
    edges = scg.directed_edges()
    change = math.inf
    for it in range(1, config.max_iterations + 1):
        old = scg.messages
        new = {}
        for i, j in edges:
            m = compute_message(scg, i, j, config, messages=old)
            if config.damping > 0:
                m = be.mix(old[(i, j)], m, config.damping)
            new[(i, j)] = m
        change = max((be.max_abs_diff(old[e], new[e]) for e in edges), default=0.0)
        scg.messages = new
        if change < config.tolerance:
            return PropagationResult(True, it, scg.sends, change)
        if config.time_limit_ms is not None:
            if (time.perf_counter() - start) * 1000 > config.time_limit_ms:
                return PropagationResult(False, it, scg.sends, change)
    return PropagationResult(False, config.max_iterations, scg.sends, change)


def extract_marginals(scg: StructuredClusterGraph):
    """Per-variable marginals from the smallest cluster mentioning each variable.

    Returns ``(marginals, flags)``; a flagged variable had an all-zero belief
    and falls back to the uniform distribution.
    """
    labels = scg.graph.labels
    beliefs = {}
    marginals, flags = [], []
    for v in range(scg.model.n):
        hosts = [i for i, lab in enumerate(labels) if v in lab]
        card = scg.model.cards[v]
        if not hosts:
            marginals.append(np.full(card, 1.0 / card))
            flags.append(True)
            continue
        host = min(hosts, key=lambda i: (len(labels[i]), i))
        if host not in beliefs:
            beliefs[host] = scg.belief(host)
        mv = scg.backend.to_dense(scg.backend.marginalize(beliefs[host], [v])).values
        total = mv.sum()
        if total > 0:
            marginals.append(mv / total)
            flags.append(False)
        else:
            marginals.append(np.full(card, 1.0 / card))
            flags.append(True)
    return marginals, flags


@dataclass
class SMPResult:
    marginals: list
    flags: list
    metadata: dict


def run_algorithm_1(
    model: GraphicalModel,
    params: JoinGraphParams = JoinGraphParams(),
    sampler: SamplerConfig | None = None,
    config: EngineConfig = EngineConfig(),
    kind=ReprKind.DENSE,
    graph: ClusterGraph | None = None,
    samples: SampleSet | None = None,
) -> SMPResult:
    """Join graph -> samples -> structured initialization -> propagation -> marginals.

    ``sampler=None`` (and no ``samples``) runs with full support, i.e. the
    infinite-sample limit.
    """
    kind = ReprKind(kind)
    t0 = time.perf_counter()
    if graph is None:
        graph = build_join_graph(model, params)
    if samples is None and sampler is not None:
        samples = generate_samples(model, sampler)
    meta = {
        "repr": kind.value,
        "seed": sampler.seed if sampler is not None else "none",
        "k": samples.k if samples is not None else "inf",
        "epsilon": config.epsilon,
        "schedule": config.schedule,
        "clusters": graph.num_vertices,
        "edges": len(graph.edges),
    }
    with metered() as meter:
        try:
            scg = initialize_scg(graph, samples, kind, model, config.augment_support)
            prop = run_propagation(scg, config)
            marginals, flags = extract_marginals(scg)
            meta.update(iterations=prop.iterations, converged=prop.converged, sends=prop.sends)
        except (SupportStarvationError, EmptyBeliefError) as exc:
            log.warning("run degraded to uniform marginals: %s", exc)
            marginals = [np.full(c, 1.0 / c) for c in model.cards]
            flags = [True] * model.n
            meta.update(iterations=0, converged=False, sends=0, starved=str(exc))
    meta["work"] = meter.as_dict()
    meta["wall_ms"] = int(round((time.perf_counter() - t0) * 1000))
    return SMPResult(marginals, flags, meta)


__all__ = [
    "ReprKind",
    "EngineConfig",
    "StructuredClusterGraph",
    "initialize_scg",
    "compute_message",
    "lossless_message",
    "run_propagation",
    "extract_marginals",
    "run_algorithm_1",
    "SMPResult",
    "SMPError",
]
