import math
import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from smp.errors import ContractError, DivisionSupportError, EnumerationCapError, NormalizationError
from smp.factor import (
    DenseFactor,
    GraphicalModel,
    evaluate_unnormalized,
    factor_divide,
    factor_marginalize,
    factor_product,
    factor_sum_out,
    joint_table,
    kl_divergence,
    normalize,
    partition_bruteforce,
)

from conftest import dense_factors, tiny_model


def test_scope_is_canonicalized_without_moving_values():
    f = DenseFactor((1, 0), (2, 3), [1, 2, 3, 4, 5, 6])  # B fastest in file order
    assert f.scope == (0, 1)
    assert f.cards == (3, 2)
    for b, a in itertools.product(range(2), range(3)):
        assert f({0: a, 1: b}) == 1 + 3 * b + a


@pytest.mark.parametrize(
    "scope,cards,vals",
    [((0,), (2,), [1, 2, 3]), ((0, 0), (2, 2), [1] * 4), ((0,), (2,), [1, -1]), ((0,), (2,), [1, math.nan])],
)
def test_invalid_factors_rejected(scope, cards, vals):
    with pytest.raises(ContractError):
        DenseFactor(scope, cards, vals)


def test_product_examples():
    f = DenseFactor((0,), (2,), [2, 1])
    g = DenseFactor((0, 1), (2, 2), [1, 3, 2, 0])
    assert np.array_equal(factor_product(f, g).values, [[2, 6], [2, 0]])
    ones = DenseFactor.constant(1.0, (0, 3), (2, 2))
    assert factor_product(g, ones).allclose(factor_product(ones, g))
    assert factor_product(g, DenseFactor.constant(1.0, (0, 1), (2, 2))).allclose(g)
    scalar = factor_product(DenseFactor.constant(2.0), DenseFactor.constant(5.0))
    assert scalar.scope == () and float(scalar.values) == 10.0


def test_sum_out_examples(f1):
    assert factor_sum_out(f1, []) is f1
    assert np.array_equal(factor_sum_out(f1, [1]).values, [6, 2])
    h = DenseFactor((0, 1), (2, 2), [2, 6, 2, 0])
    assert float(factor_sum_out(h, [0, 1]).values) == 10.0
    with pytest.raises(ContractError):
        factor_sum_out(h, [7])


def test_divide_examples():
    h = DenseFactor((0, 1), (2, 2), [2, 6, 2, 0])
    q = factor_divide(h, DenseFactor((0,), (2,), [2, 1]))
    # row A=1 is divided by 1, so it keeps its values
    assert np.array_equal(q.values, [[1, 3], [2, 0]])
    assert np.array_equal(factor_divide(h, h).values, [[1, 1], [1, 0]])
    with pytest.raises(DivisionSupportError, match="index 0"):
        factor_divide(DenseFactor((0,), (2,), [1, 0]), DenseFactor((0,), (2,), [0, 1]))


def test_normalize_and_kl():
    assert np.allclose(normalize(DenseFactor((0,), (2,), [2, 2])).values, [0.5, 0.5])
    assert np.allclose(normalize(DenseFactor((0,), (2,), [6, 2])).values, [0.75, 0.25])
    with pytest.raises(NormalizationError):
        normalize(DenseFactor((0,), (2,), [0, 0]))
    p, q = DenseFactor((0,), (2,), [1, 1]), DenseFactor((0,), (2,), [3, 1])
    assert kl_divergence(p, p) == 0.0
    expected = 0.5 * math.log(0.5 / 0.75) + 0.5 * math.log(0.5 / 0.25)
    assert kl_divergence(p, q) == pytest.approx(expected, abs=1e-15)
    assert kl_divergence(DenseFactor((0,), (2,), [1, 0]), DenseFactor((0,), (2,), [0, 1])) == math.inf


def test_model_partition_and_evaluation():
    m = tiny_model()
    assert partition_bruteforce(m) == 10.0
    assert evaluate_unnormalized(m, (1, 1)) == 0.0
    single = GraphicalModel([2], [DenseFactor((0,), (2,), [0.4, 0.6])])
    assert partition_bruteforce(single) == pytest.approx(1.0)
    with pytest.raises(EnumerationCapError):
        joint_table(m, cap=3)


def test_model_validation():
    with pytest.raises(ContractError):
        GraphicalModel([2], [DenseFactor((1,), (2,), [1, 1])])
    with pytest.raises(ContractError):
        GraphicalModel([2, 3], [DenseFactor((1,), (2,), [1, 1])])
    with pytest.raises(ContractError):
        GraphicalModel([1], [])


def test_evidence_zeroes_inconsistent_entries():
    m = tiny_model().with_evidence({1: 0})
    assert partition_bruteforce(m) == 2 * 1 + 1 * 2
    m2 = GraphicalModel([2, 2], [DenseFactor((0,), (2,), [1, 1])]).with_evidence({1: 1})
    assert evaluate_unnormalized(m2, (0, 0)) == 0 and evaluate_unnormalized(m2, (0, 1)) == 1


@given(dense_factors(), dense_factors())
def test_product_is_commutative_and_pointwise(f, g):
    if any(f.card_map.get(v, c) != c for v, c in g.card_map.items()):
        with pytest.raises(ContractError):
            factor_product(f, g)
        return
    h1, h2 = factor_product(f, g), factor_product(g, f)
    assert h1.scope == h2.scope
    assert np.allclose(h1.values, h2.values)
    cm = {**f.card_map, **g.card_map}
    for x in itertools.islice(itertools.product(*(range(cm[v]) for v in h1.scope)), 20):
        a = dict(zip(h1.scope, x))
        assert h1(a) == pytest.approx(f(a) * g(a))


@given(dense_factors(max_vars=4), st.data())
def test_marginalization_preserves_total(f, data):
    keep = data.draw(st.sets(st.sampled_from(f.scope))) if f.scope else set()
    m = factor_marginalize(f, keep)
    assert m.scope == tuple(sorted(keep))
    assert float(m.values.sum()) == pytest.approx(float(f.values.sum()))


@given(dense_factors(allow_zero=False))
def test_kl_is_nonnegative_and_zero_on_self(f):
    if f.values.sum() == 0:
        return
    assert kl_divergence(f, f) == pytest.approx(0.0, abs=1e-12)
    g = DenseFactor(f.scope, f.cards, np.full(f.values.size, 1.0))
    assert kl_divergence(f, g) >= 0.0
