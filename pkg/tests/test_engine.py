import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smp.add import leaf_model_count
from smp.cluster_graph import JoinGraphParams, build_join_graph, build_junction_tree
from smp.engine import (
    EngineConfig,
    ReprKind,
    compute_message,
    extract_marginals,
    initialize_scg,
    run_algorithm_1,
    run_propagation,
)
from smp.errors import ContractError, EmptyBeliefError, SupportStarvationError
from smp.evaluation import avg_kl, generate_ising
from smp.exact import exact_marginals
from smp.factor import DenseFactor, GraphicalModel
from smp.sampling import SampleSet, SamplerConfig
from smp.sparse import SupportRelation

from conftest import random_model, tiny_model

KINDS = [k.value for k in ReprKind]


def dense_values(scg, r):
    return scg.backend.to_dense(r).values


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("schedule", ["sum_product", "belief_update"])
def test_tiny_model_marginals(kind, schedule):
    m = tiny_model()
    res = run_algorithm_1(m, config=EngineConfig(schedule=schedule), kind=kind,
                          graph=build_junction_tree(m))
    assert np.allclose(res.marginals[0], [0.8, 0.2], atol=1e-12)
    assert np.allclose(res.marginals[1], [0.4, 0.6], atol=1e-12)
    assert res.flags == [False, False]


def test_lossless_initialization_is_plain_bp():
    m = random_model(np.random.default_rng(0), 5)
    g = build_join_graph(m, JoinGraphParams(3))
    scg = initialize_scg(g, None, "dense", m)
    for i in range(g.num_vertices):
        assert scg.vertex_support[i] is None
        assert np.all(dense_values(scg, scg.potentials[i]) > 0)


def test_hand_message_on_chain():
    m = GraphicalModel(
        [2, 2, 2],
        [DenseFactor((0, 1), (2, 2), [2, 6, 2, 0]), DenseFactor((1, 2), (2, 2), np.ones(4))],
    )
    jt = build_junction_tree(m)
    src = next(i for i, lab in enumerate(jt.labels) if lab == {0, 1})
    dst = 1 - src
    for kind in KINDS:
        scg = initialize_scg(jt, None, kind, m)
        msg = compute_message(scg, src, dst)
        assert np.allclose(dense_values(scg, msg), [0.4, 0.6], atol=1e-15)


def test_sample_projection_example():
    # cluster {X0, X1} sees {(0,1), (1,0)}; its factor is positive everywhere
    m = GraphicalModel([2, 2, 2], [DenseFactor((0, 1), (2, 2), [1, 2, 3, 4]),
                                   DenseFactor((1, 2), (2, 2), [1, 1, 1, 1])])
    s = SampleSet([[0, 1, 1], [1, 0, 0], [1, 0, 1]], (2, 2, 2), "file", 0)
    jt = build_junction_tree(m)
    v = next(i for i, lab in enumerate(jt.labels) if lab == {0, 1})
    for kind in KINDS:
        scg = initialize_scg(jt, s, kind, m, augment=False)
        assert scg.vertex_support[v].tuples == {(0, 1), (1, 0)}
        assert np.array_equal(dense_values(scg, scg.potentials[v]), [[0, 2], [3, 0]])
        if kind == "add":
            assert leaf_model_count(scg.potentials[v], 0.0) == 2
    scg = initialize_scg(jt, s, "dense", m, augment=True)
    assert scg.vertex_support[v].tuples == {(0, 0), (0, 1), (1, 0), (1, 1)}


def test_single_sample_gives_point_masses():
    m = random_model(np.random.default_rng(2), 4)
    s = SampleSet([[1, 0, 1, 1]], m.cards, "file", 0)
    g = build_join_graph(m, JoinGraphParams(3))
    scg = initialize_scg(g, s, "sparse", m, augment=False)
    for pot in scg.potentials:
        assert len(pot) == 1


def test_empty_belief_is_reported():
    m = GraphicalModel([2, 2], [DenseFactor((0, 1), (2, 2), [0, 1, 1, 1])])
    s = SampleSet([[0, 0]], (2, 2), "file", 0)
    with pytest.raises(EmptyBeliefError):
        initialize_scg(build_junction_tree(m), s, "dense", m, augment=False)


def test_starvation_when_edge_support_misses_message():
    m = GraphicalModel(
        [2, 2, 2],
        [DenseFactor((0, 1), (2, 2), [1, 0, 1, 0]), DenseFactor((1, 2), (2, 2), np.ones(4))],
    )
    jt = build_junction_tree(m)
    src = next(i for i, lab in enumerate(jt.labels) if lab == {0, 1})
    for kind in KINDS:
        scg = initialize_scg(jt, None, kind, m)
        # the true message over X1 is [2, 0]; allow only X1 = 1
        only_one = SupportRelation((1,), (2,), {(1,)})
        scg.lossy = True
        scg._edge_supp_obj[(0, 1)] = scg.backend.support_object(only_one)
        with pytest.raises(SupportStarvationError):
            compute_message(scg, src, 1 - src)


def test_tree_converges_within_two_sends_per_edge():
    m = random_model(np.random.default_rng(5), 8)
    jt = build_junction_tree(m)
    scg = initialize_scg(jt, None, "dense", m)
    prop = run_propagation(scg)
    assert prop.converged and prop.sends <= 2 * len(jt.edges)


def test_loopy_iteration_cap():
    m = generate_ising(3, 3, coupling=(-2, 2), seed=0)
    g = build_join_graph(m, JoinGraphParams(2))
    scg = initialize_scg(g, None, "dense", m)
    prop = run_propagation(scg, EngineConfig(max_iterations=2, tolerance=0.0))
    assert not prop.converged and prop.iterations == 2
    marginals, flags = extract_marginals(scg)
    assert len(marginals) == 9 and not any(flags)


def test_identical_loopy_trajectories_across_kinds():
    m = random_model(np.random.default_rng(12), 7, zero_prob=0.3)
    assert exact_marginals(m).defined and m.zero_fraction() > 0
    g = build_join_graph(m, JoinGraphParams(3))
    assert not g.is_forest()
    scgs = {k: initialize_scg(g, None, k, m) for k in KINDS}
    one = EngineConfig(max_iterations=1, tolerance=0.0)
    for _ in range(8):
        for scg in scgs.values():
            run_propagation(scg, one)
        ref = scgs["dense"]
        for kind in ("sparse", "add"):
            scg = scgs[kind]
            for e in ref.messages:
                assert np.allclose(dense_values(scg, scg.messages[e]),
                                   dense_values(ref, ref.messages[e]), rtol=0, atol=1e-12)


def test_quantization_only_variant_stays_close():
    m = generate_ising(3, 3, seed=4)
    ex = exact_marginals(m)
    g = build_join_graph(m, JoinGraphParams(3))
    base = run_algorithm_1(m, graph=g, config=EngineConfig(epsilon=0.0))
    for eps in (1e-6, 1e-3, 1e-2):
        q = run_algorithm_1(m, graph=g, config=EngineConfig(epsilon=eps))
        assert abs(avg_kl(q.marginals, ex.marginals) - avg_kl(base.marginals, ex.marginals)) < 0.05
    # tiny epsilon merges nothing
    q = run_algorithm_1(m, graph=g, config=EngineConfig(epsilon=1e-15))
    assert all(np.array_equal(a, b) for a, b in zip(q.marginals, base.marginals))


def test_run_metadata_and_starvation_fallback():
    m = GraphicalModel([2, 2], [DenseFactor((0, 1), (2, 2), [0, 1, 1, 1])])
    s = SampleSet([[0, 0]], (2, 2), "file", 0)
    res = run_algorithm_1(m, samples=s, config=EngineConfig(augment_support=False))
    assert all(res.flags) and np.allclose(res.marginals[0], [0.5, 0.5])
    ok = run_algorithm_1(m, sampler=SamplerConfig("importance", 64, 3), kind="sparse")
    for key in ("repr", "seed", "k", "epsilon", "schedule", "iterations", "converged", "work"):
        assert key in ok.metadata
    assert ok.metadata["work"]["sparse_visits"] > 0


def test_audit_mode_checks_every_message():
    m = generate_ising(3, 3, seed=2)
    res = run_algorithm_1(m, sampler=SamplerConfig("gibbs", 64, 0),
                          config=EngineConfig(epsilon=1e-3, audit=True), kind="sparse")
    assert not any(res.flags)


def test_engine_config_contract():
    with pytest.raises(ContractError):
        EngineConfig(epsilon=-1)
    with pytest.raises(ContractError):
        EngineConfig(schedule="max_product")
    with pytest.raises(ContractError):
        EngineConfig(damping=1.0)


@settings(max_examples=15)
@given(st.integers(0, 2**31), st.sampled_from(KINDS), st.sampled_from(["sum_product", "belief_update"]))
def test_lossless_tree_runs_are_exact(seed, kind, schedule):
    m = random_model(np.random.default_rng(seed), 6, zero_prob=0.3)
    ex = exact_marginals(m)
    if not ex.defined:
        return
    res = run_algorithm_1(m, config=EngineConfig(schedule=schedule), kind=kind,
                          graph=build_junction_tree(m))
    for p, q in zip(res.marginals, ex.marginals):
        assert np.max(np.abs(p - q)) <= 1e-9


@settings(max_examples=15)
@given(st.integers(0, 2**31), st.sampled_from(KINDS), st.integers(1, 200))
def test_sampled_runs_keep_messages_on_support(seed, kind, k):
    m = random_model(np.random.default_rng(seed), 6)
    g = build_join_graph(m, JoinGraphParams(3))
    res = run_algorithm_1(m, graph=g, sampler=SamplerConfig("gibbs", k, seed % 1000),
                          config=EngineConfig(epsilon=1e-4, audit=True, max_iterations=20), kind=kind)
    for p in res.marginals:
        assert p.sum() == pytest.approx(1.0) and np.all(p >= 0)
