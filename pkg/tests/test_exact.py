import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from smp.errors import EnumerationCapError
from smp.exact import bruteforce_marginals, exact_marginals
from smp.factor import DenseFactor, GraphicalModel

from conftest import random_model, tiny_model


def test_tiny_model():
    res = exact_marginals(tiny_model())
    assert res.z == pytest.approx(10.0, rel=1e-14)
    assert np.allclose(res.marginals[0], [0.8, 0.2], atol=1e-15)
    assert np.allclose(res.marginals[1], [0.4, 0.6], atol=1e-15)


def test_uniform_model():
    m = GraphicalModel([2, 3], [DenseFactor((0,), (2,), [2, 2]), DenseFactor((1,), (3,), [0.5] * 3)])
    res = exact_marginals(m)
    assert res.z == pytest.approx(2 * 3 * 2 * 0.5)
    assert np.allclose(res.marginals[1], [1 / 3] * 3)


def test_disconnected_components_are_independent():
    m = GraphicalModel([2, 2], [DenseFactor((0,), (2,), [1, 3]), DenseFactor((1,), (2,), [2, 2])])
    res = exact_marginals(m)
    assert np.allclose(res.marginals[0], [0.25, 0.75]) and np.allclose(res.marginals[1], [0.5, 0.5])
    assert res.z == pytest.approx(16.0)


def test_single_variable_bruteforce():
    res = bruteforce_marginals(GraphicalModel([2], [DenseFactor((0,), (2,), [0.4, 0.6])]))
    assert np.allclose(res.marginals[0], [0.4, 0.6])


def test_unsatisfiable_model_is_undefined():
    m = GraphicalModel([2, 2], [DenseFactor((0,), (2,), [1, 0]), DenseFactor((0, 1), (2, 2), [0, 0, 1, 1])])
    for res in (exact_marginals(m), bruteforce_marginals(m)):
        assert not res.defined and res.z == 0.0 and res.marginals == [None, None]


def test_enumeration_cap():
    with pytest.raises(EnumerationCapError):
        bruteforce_marginals(random_model(np.random.default_rng(0), 6), cap=10)


@given(st.integers(0, 2**31), st.integers(1, 10), st.floats(0.0, 0.4))
def test_oracles_agree(seed, n, zero_prob):
    m = random_model(np.random.default_rng(seed), n, zero_prob=zero_prob, max_card=3)
    a, b = exact_marginals(m), bruteforce_marginals(m)
    assert a.defined == b.defined
    if not a.defined:
        return
    assert math.isclose(a.z, b.z, rel_tol=1e-10)
    for p, q in zip(a.marginals, b.marginals):
        assert np.allclose(p, q, rtol=1e-10, atol=1e-300)
