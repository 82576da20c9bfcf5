"""Sample generation for support induction: Gibbs and importance sampling.

Only the *support* of a sample set is consumed downstream; importance
weights are never computed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cluster_graph import min_fill_order
from .errors import ContractError, DeterminismError, ProposalFailureError
from .factor import GraphicalModel
from .sparse import SupportRelation

ACCEPTANCE_FLOOR = 1e-4
TRIAL_WINDOW = 10_000
BLANKET_TABLE_CAP = 2**20


@dataclass(frozen=True)
class SamplerConfig:
    method: str = "gibbs"
    k: int = 1024
    seed: int = 0
    burn_in: int = 100
    thinning: int = 2
    chains: int = 256

    def __post_init__(self):
        if self.method not in ("gibbs", "importance"):
            raise ContractError(f"unknown sampling method {self.method!r}")
        if self.k < 1:
            raise ContractError("k must be >= 1")
        if self.burn_in < 0 or self.thinning < 1 or self.chains < 1:
            raise ContractError("burn_in >= 0, thinning >= 1 and chains >= 1 required")


@dataclass(frozen=True, eq=False)
class SampleSet:
    samples: np.ndarray = field(repr=False)   # (k, n) integer matrix
    cards: tuple
    method: str
    seed: int
    burn_in: int = 0
    thinning: int = 1
    trials: int = 0

    def __post_init__(self):
        arr = np.array(self.samples, dtype=np.int64)
        if arr.ndim != 2 or arr.shape[1] != len(self.cards):
            raise ContractError("samples must be a (k, n) matrix")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "cards", tuple(self.cards))

    @property
    def k(self):
        return self.samples.shape[0]

    def dumps(self) -> str:
        return "".join(" ".join(map(str, row)) + "\n" for row in self.samples.tolist())


def load_samples(text: str, cards, method="file", seed=-1) -> SampleSet:
    rows = [list(map(int, line.split())) for line in text.splitlines() if line.strip()]
    return SampleSet(np.array(rows, dtype=np.int64).reshape(len(rows), len(cards)), cards, method, seed)


def _touching(model):
    out = [[] for _ in range(model.n)]
    for f in model.factors:
        for v in f.scope:
            out[v].append(f)
    return out


def _blanket_table(model, v, factors):
    """Unnormalized conditional of ``v`` for every Markov-blanket configuration.

    Returns ``(blanket, strides, table)`` with ``table[code]`` a row over the
    values of ``v``, where ``code = state[blanket] @ strides``.
    """
    blanket = sorted({u for f in factors for u in f.scope if u != v})
    bcards = [model.cards[u] for u in blanket]
    if math.prod(bcards) * model.cards[v] > BLANKET_TABLE_CAP:
        return None
    strides = np.ones(len(blanket), dtype=np.int64)
    for i in range(len(blanket) - 2, -1, -1):
        strides[i] = strides[i + 1] * bcards[i + 1]
    axes = blanket + [v]
    shape = bcards + [model.cards[v]]
    table = np.ones(shape)
    for f in factors:
        view = [1] * len(axes)
        for u, c in zip(f.scope, f.cards):
            view[axes.index(u)] = c
        perm = sorted(range(len(f.scope)), key=lambda a: axes.index(f.scope[a]))
        table = table * f.values.transpose(perm).reshape(view)
    return blanket, strides, table.reshape(-1, model.cards[v])


def _conditional_slices(factors, v, card, state):
    w = np.ones((state.shape[0], card))
    for f in factors:
        idx = tuple(
            np.arange(card)[None, :] if u == v else state[:, u][:, None] for u in f.scope
        )
        w = w * f.values[idx]
    return w


def gibbs_sample(model: GraphicalModel, config: SamplerConfig) -> SampleSet:
    """Run ``min(k, chains)`` Gibbs chains in lockstep from uniform random starts."""
    for j, f in enumerate(model.factors):
        if np.any(f.values == 0):
            raise DeterminismError(
                f"factor {j} contains zeros; Gibbs sampling does not mix under "
                "determinism, use importance sampling"
            )
    rng = np.random.default_rng(config.seed)
    chains = min(config.k, config.chains)
    per_chain = math.ceil(config.k / chains)
    cards = np.array(model.cards)
    state = (rng.random((chains, model.n)) * cards).astype(np.int64)
    touching = _touching(model)
    conditionals = [_blanket_table(model, v, f) for v, f in enumerate(touching)]
    rows = np.arange(chains)
    kept = []
    sweeps = config.burn_in + per_chain * config.thinning
    for sweep in range(1, sweeps + 1):
        for v in range(model.n):
            card = model.cards[v]
            if conditionals[v] is None:
                w = _conditional_slices(touching[v], v, card, state)
            else:
                blanket, strides, table = conditionals[v]
                w = table[state[:, blanket] @ strides] if blanket else np.broadcast_to(table[0], (chains, card))
            cum = np.cumsum(w, axis=1)
            total = cum[:, -1]
            if np.any(total <= 0):
                raise DeterminismError(
                    f"conditional of variable {v} has no positive value; "
                    "use importance sampling"
                )
            u = rng.random(chains) * total
            state[:, v] = np.minimum((cum <= u[:, None]).sum(axis=1), card - 1)
        if sweep > config.burn_in and (sweep - config.burn_in) % config.thinning == 0:
            kept.append(state[rows].copy())
    samples = np.stack(kept, axis=0).reshape(-1, model.n)[: config.k]
    return SampleSet(samples, model.cards, "gibbs", config.seed, config.burn_in, config.thinning)


def sampling_order(model: GraphicalModel):
    order, _ = min_fill_order(model)
    return order[::-1]


def importance_sample(model: GraphicalModel, config: SamplerConfig) -> SampleSet:
    """Sequential proposal along the reversed min-fill order.

    Each variable is drawn from the normalized product of the factors whose
    scope becomes fully assigned at that variable.  Proposals that hit an
    all-zero conditional are rejected and redrawn.
    """
    rng = np.random.default_rng(config.seed)
    order = sampling_order(model)
    pos = {v: i for i, v in enumerate(order)}
    closing = [[] for _ in range(model.n)]
    for f in model.factors:
        if f.scope:
            closing[max(f.scope, key=pos.__getitem__)].append(f)
        elif float(f.values) <= 0:
            raise ProposalFailureError("model contains an all-zero constant factor")
    accepted = []
    n_acc = 0
    trials = 0
    while n_acc < config.k:
        batch = max(config.k - n_acc, 256)
        state = np.zeros((batch, model.n), dtype=np.int64)
        alive = np.ones(batch, dtype=bool)
        for v in order:
            card = model.cards[v]
            w = np.ones((batch, card))
            for f in closing[v]:
                idx = tuple(
                    np.arange(card)[None, :] if u == v else state[:, u][:, None]
                    for u in f.scope
                )
                w = w * f.values[idx]
            cum = np.cumsum(w, axis=1)
            total = cum[:, -1]
            alive &= total > 0
            u = rng.random(batch) * np.where(total > 0, total, 1.0)
            state[:, v] = np.minimum((cum <= u[:, None]).sum(axis=1), card - 1)
        trials += batch
        good = state[alive]
        accepted.append(good)
        n_acc += len(good)
        if trials >= TRIAL_WINDOW and n_acc / trials < ACCEPTANCE_FLOOR:
            raise ProposalFailureError(
                f"acceptance rate {n_acc / trials:.2e} after {trials} proposals"
            )
    samples = np.concatenate(accepted, axis=0)[: config.k]
    return SampleSet(samples, model.cards, "importance", config.seed, 0, 1, trials)


def generate_samples(model: GraphicalModel, config: SamplerConfig) -> SampleSet:
    if config.method == "gibbs":
        return gibbs_sample(model, config)
    return importance_sample(model, config)


def unique_rows(rows: np.ndarray, cards) -> np.ndarray:
    """Distinct rows in lexicographic order, via mixed-radix integer codes."""
    cards = list(cards)
    if not cards or math.prod(cards) >= 2**62:
        return np.unique(rows, axis=0)
    strides = np.ones(len(cards), dtype=np.int64)
    for i in range(len(cards) - 2, -1, -1):
        strides[i] = strides[i + 1] * cards[i + 1]
    codes = np.unique(rows @ strides)
    return (codes[:, None] // strides[None, :]) % np.array(cards, dtype=np.int64)


def project_samples(samples: SampleSet, scope) -> SupportRelation:
    scope = tuple(sorted(scope))
    cards = tuple(samples.cards[v] for v in scope)
    if not scope:
        return SupportRelation((), (), frozenset({()}) if samples.k else frozenset())
    cols = unique_rows(samples.samples[:, list(scope)], cards)
    return SupportRelation(scope, cards, frozenset(map(tuple, cols.tolist())))


def augment_support(
    support: SupportRelation, model: GraphicalModel, factor_indices, samples: SampleSet | None = None
) -> SupportRelation:
    """Add every nonzero tuple of the cluster's factors, completed on the other variables.

    Completions are the sample projections on the remaining cluster
    variables; without any, a single all-zero completion is used.
    """
    scope = support.scope
    extra = set()
    for j in factor_indices:
        f = model.factors[j]
        if not f.scope:
            continue
        rest = [v for v in scope if v not in f.scope]
        if rest and samples is not None and samples.k:
            completions = unique_rows(
                samples.samples[:, rest], [samples.cards[v] for v in rest]
            ).tolist()
        else:
            completions = [[0] * len(rest)]
        nz = np.argwhere(f.values > 0).tolist()
        for t in nz:
            val = dict(zip(f.scope, t))
            for c in completions:
                val.update(zip(rest, c))
                extra.add(tuple(val[v] for v in scope))
    if not extra:
        return support
    return SupportRelation(scope, support.cards, support.tuples | extra)
