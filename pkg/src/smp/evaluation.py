"""Accuracy metrics, bias/variance estimation, sweeps and model generators."""
from __future__ import annotations

import csv
import io
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .cluster_graph import JoinGraphParams, build_join_graph
from .engine import EngineConfig, ReprKind, run_algorithm_1
from .errors import ContractError, SMPError
from .exact import exact_marginals
from .factor import DenseFactor, GraphicalModel, kl_divergence
from .sampling import SamplerConfig, generate_samples

CSV_FIELDS = [
    "run_id", "seed", "repr", "i_bound", "k", "epsilon", "schedule",
    "iterations", "converged", "avg_kl", "wall_ms",
]
AXES = ("k", "epsilon", "ibound", "time")


# --------------------------------------------------------------------------
# generators


def generate_ising(rows, cols, coupling=(-1.0, 1.0), field=(-0.5, 0.5), seed=0):
    """Grid Ising model over {0,1} spins with strictly positive potentials.

    Pairwise potential ``exp(J s_i s_j)`` and unary ``exp(h s_i)`` with
    ``s = 2x - 1``, ``J ~ U(coupling)`` and ``h ~ U(field)``.
    """
    rng = np.random.default_rng(seed)
    idx = lambda r, c: r * cols + c  # noqa: E731
    factors = []
    for r in range(rows):
        for c in range(cols):
            h = rng.uniform(*field)
            factors.append(DenseFactor((idx(r, c),), (2,), np.exp([-h, h])))
    for r in range(rows):
        for c in range(cols):
            for rr, cc in ((r, c + 1), (r + 1, c)):
                if rr < rows and cc < cols:
                    j = rng.uniform(*coupling)
                    factors.append(
                        DenseFactor((idx(r, c), idx(rr, cc)), (2, 2), np.exp([j, -j, -j, j]))
                    )
    return GraphicalModel([2] * (rows * cols), factors)


def generate_deterministic(n, clause_density=1.0, seed=0, arity=3, hardness=0.6):
    """Hard 0/1 constraints mixed with soft unary factors, satisfiable by construction.

    A planted assignment is drawn first; every constraint allows the
    planted tuple and forbids each other tuple with probability ``hardness``.
    """
    rng = np.random.default_rng(seed)
    planted = rng.integers(0, 2, size=n)
    factors = []
    for _ in range(max(1, int(round(clause_density * n)))):
        scope = sorted(rng.choice(n, size=min(arity, n), replace=False).tolist())
        table = (rng.random(2 ** len(scope)) >= hardness).astype(float)
        table.reshape([2] * len(scope))[tuple(planted[scope])] = 1.0
        factors.append(DenseFactor(scope, [2] * len(scope), table))
    for v in range(n):
        factors.append(DenseFactor((v,), (2,), rng.uniform(0.2, 1.0, size=2)))
    return GraphicalModel([2] * n, factors), planted


# --------------------------------------------------------------------------
# metrics


def avg_kl(approx, exact) -> float:
    """Mean over variables of KL(exact_i || approx_i); ``math.inf`` if any term is."""
    if len(approx) != len(exact):
        raise ContractError("marginal lists cover different variables")
    total = 0.0
    for i, (q, p) in enumerate(zip(approx, exact)):
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        term = kl_divergence(DenseFactor((i,), (p.size,), p), DenseFactor((i,), (q.size,), q))
        if math.isinf(term):
            return math.inf
        total += term
    return total / len(exact)


def canonical_estimand(marginals) -> float:
    """Mean over variables of the estimated probability of value 0."""
    return float(np.mean([np.asarray(p)[0] for p in marginals]))


class BiasVariance(NamedTuple):
    mse: float
    bias2: float
    variance: float


def bias_variance(estimates, truth) -> BiasVariance:
    """Empirical decomposition of squared error across sample sets.

    ``mse = bias2 + variance`` holds as an algebraic identity of these
    estimators (population variance, no Bessel correction).
    """
    h = np.asarray([getattr(e, "estimand", e) for e in estimates], dtype=float)
    if h.size < 2:
        raise ContractError("bias_variance needs at least 2 estimates")
    mean = h.mean()
    mse = float(np.mean((h - truth) ** 2))
    bias2 = float((mean - truth) ** 2)
    variance = float(np.mean((h - mean) ** 2))
    return BiasVariance(mse, bias2, variance)


# --------------------------------------------------------------------------
# sweeps


@dataclass
class RunRecord:
    run_id: int
    seed: int
    repr: str
    i_bound: int
    k: object            # int, or "inf" for the full-support limit
    epsilon: float
    schedule: str
    iterations: int
    converged: bool
    avg_kl: float
    wall_ms: int
    estimand: float = math.nan
    axis_value: object = None
    error: str = ""

    def csv_row(self, timing=False):
        return {
            "run_id": self.run_id,
            "seed": self.seed,
            "repr": self.repr,
            "i_bound": self.i_bound,
            "k": self.k,
            "epsilon": _fmt(self.epsilon),
            "schedule": self.schedule,
            "iterations": self.iterations,
            "converged": "true" if self.converged else "false",
            "avg_kl": _fmt(self.avg_kl),
            "wall_ms": self.wall_ms if timing else 0,
        }


def _fmt(x):
    if isinstance(x, str):
        return x
    if math.isinf(x):
        return "inf"
    return repr(float(x))


@dataclass
class SweepSpec:
    model: GraphicalModel
    axis: str
    values: list
    reps: int = 10
    repr: str = "sparse"
    i_bound: int = 6
    k: object = 1024             # None runs without sampling
    epsilon: float = 2.0**-20
    schedule: str = "sum_product"
    method: str = "gibbs"
    seed: int = 0
    max_iterations: int = 100
    tolerance: float = 1e-6
    damping: float = 0.0
    grid: dict = field(default_factory=dict)   # extra parameters crossed with the axis

    def __post_init__(self):
        if self.axis not in AXES:
            raise ContractError(f"axis must be one of {AXES}")
        if not self.values:
            raise ContractError("axis values must be nonempty")
        self.values = sorted(self.values)
        if self.reps < 1:
            raise ContractError("reps must be >= 1")


def _points(spec: SweepSpec):
    """All (parameter dict, axis value, rep) tasks in a fixed order."""
    base = {
        "repr": spec.repr, "i_bound": spec.i_bound, "k": spec.k, "epsilon": spec.epsilon,
        "schedule": spec.schedule, "time_limit_ms": None,
    }
    key = {"k": "k", "epsilon": "epsilon", "ibound": "i_bound", "time": "time_limit_ms"}[spec.axis]
    names = sorted(spec.grid)
    combos = list(itertools.product(*(spec.grid[n] for n in names))) or [()]
    tasks = []
    for combo in combos:
        for value in spec.values:
            for rep in range(spec.reps):
                params = dict(base, **dict(zip(names, combo)))
                params[key] = value
                tasks.append((params, value, rep))
    return tasks


def _run_task(args, cache=None):
    spec, exact, run_id, params, value, rep = args
    seed = spec.seed + rep
    k = params["k"]
    sampler = None if k in (None, "inf") else SamplerConfig(spec.method, int(k), seed)
    config = EngineConfig(
        epsilon=params["epsilon"], schedule=params["schedule"],
        max_iterations=spec.max_iterations, tolerance=spec.tolerance,
        damping=spec.damping, time_limit_ms=params["time_limit_ms"],
    )
    rec = RunRecord(
        run_id, seed, params["repr"], params["i_bound"], k if sampler else "inf",
        params["epsilon"], params["schedule"], 0, False, math.inf, 0, axis_value=value,
    )
    try:
        samples = None
        if sampler is not None and cache is not None:
            samples = cache.get(sampler)
            if samples is None:
                samples = cache[sampler] = generate_samples(spec.model, sampler)
        graph = build_join_graph(spec.model, JoinGraphParams(params["i_bound"]))
        res = run_algorithm_1(spec.model, sampler=sampler, config=config,
                              kind=params["repr"], graph=graph, samples=samples)
    except SMPError as exc:
        rec.error = str(exc)
        return rec
    rec.iterations = res.metadata["iterations"]
    rec.converged = res.metadata["converged"]
    rec.wall_ms = res.metadata["wall_ms"]
    rec.avg_kl = avg_kl(res.marginals, exact.marginals)
    rec.estimand = canonical_estimand(res.marginals)
    rec.error = res.metadata.get("starved", "")
    return rec


def sweep(spec: SweepSpec, exact=None, jobs: int = 1):
    """Run every axis value x repetition; one :class:`RunRecord` per run.

    Repetition ``r`` uses sampler seed ``spec.seed + r`` at every axis value,
    so points share sample sets wherever their sampler settings coincide.
    Sequential runs generate each such shared set once.
    """
    if exact is None:
        exact = exact_marginals(spec.model)
    tasks = [(spec, exact, i, p, v, r) for i, (p, v, r) in enumerate(_points(spec))]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_task, tasks))
    cache = {}
    return [_run_task(t, cache) for t in tasks]


def summarize(records, key=lambda r: (r.repr, r.axis_value)):
    """Mean and standard deviation of avg_kl per point, in first-seen order."""
    groups = {}
    for r in records:
        groups.setdefault(key(r), []).append(r)
    out = []
    for k, rs in groups.items():
        vals = np.array([r.avg_kl for r in rs])
        if np.any(np.isinf(vals)):
            mean, sd = math.inf, math.inf
        else:
            mean, sd = float(vals.mean()), float(vals.std())
        out.append((k, rs, mean, sd))
    return out


def write_csv(records, axis, timing=False) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in records:
        w.writerow(r.csv_row(timing))
    col = {"k": "k", "epsilon": "epsilon", "ibound": "i_bound", "time": "wall_ms"}[axis]
    for (_, value), rs, mean, sd in summarize(records):
        for label, stat in (("mean", mean), ("std", sd)):
            row = dict.fromkeys(CSV_FIELDS, "")
            row.update(run_id=label, repr=rs[0].repr, schedule=rs[0].schedule,
                       i_bound=rs[0].i_bound, k=rs[0].k, epsilon=_fmt(rs[0].epsilon))
            row[col] = value if axis != "epsilon" else _fmt(value)
            row["avg_kl"] = _fmt(stat)
            w.writerow(row)
    return buf.getvalue()


def lower_envelope(records):
    """Best per-configuration mean avg_kl for each (repr, axis value)."""
    cfg = lambda r: (r.repr, r.axis_value, r.i_bound, r.k, r.epsilon, r.schedule)  # noqa: E731
    best = {}
    for (repr_, value, *rest), rs, mean, sd in summarize(records, key=cfg):
        cur = best.get((repr_, value))
        if cur is None or mean < cur[2]:
            best[(repr_, value)] = (rs[0], value, mean, sd)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["repr", "axis_value", "i_bound", "k", "epsilon", "schedule", "mean_avg_kl", "std_avg_kl"])
    for (repr_, value), (r, _, mean, sd) in sorted(best.items(), key=lambda kv: (kv[0][0], kv[0][1])):
        w.writerow([repr_, value, r.i_bound, r.k, _fmt(r.epsilon), r.schedule, _fmt(mean), _fmt(sd)])
    return buf.getvalue()


def run_points(model, exact, seeds, k, i_bound, epsilon, kind="sparse", method="gibbs",
               schedule="sum_product", graph=None):
    """Records for one parameter point across sample seeds (no CSV plumbing)."""
    graph = graph or build_join_graph(model, JoinGraphParams(i_bound))
    out = []
    for seed in seeds:
        sampler = SamplerConfig(method, k, seed) if k is not None else None
        res = run_algorithm_1(model, sampler=sampler, config=EngineConfig(epsilon=epsilon, schedule=schedule),
                              kind=kind, graph=graph)
        out.append(RunRecord(
            len(out), seed, ReprKind(kind).value, i_bound, k if k is not None else "inf", epsilon,
            schedule, res.metadata["iterations"], res.metadata["converged"],
            avg_kl(res.marginals, exact.marginals), res.metadata["wall_ms"],
            canonical_estimand(res.marginals),
        ))
    return out


__all__ = [
    "generate_ising", "generate_deterministic", "avg_kl", "canonical_estimand",
    "bias_variance", "BiasVariance", "RunRecord", "SweepSpec", "sweep", "summarize",
    "write_csv", "lower_envelope", "run_points", "CSV_FIELDS",
]
