import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from smp.errors import DivisionSupportError
from smp.factor import DenseFactor, factor_divide, factor_marginalize, factor_product
from smp.sparse import (
    SparseTable,
    SupportRelation,
    sparse_divide,
    sparse_from_dense,
    sparse_lossy_project,
    sparse_marginalize,
    sparse_product,
    sparse_sum_out,
    sparse_to_dense,
)
from smp.work import metered

from conftest import dense_factors


def test_from_dense_drops_zero_tuple(f1):
    t = sparse_from_dense(f1)
    assert t.entries == {(0, 0): 3.0, (0, 1): 3.0, (1, 0): 2.0}
    assert len(sparse_from_dense(DenseFactor((0,), (2,), [0, 0]))) == 0
    assert len(sparse_from_dense(DenseFactor((0, 1), (2, 3), np.ones(6)))) == 6


def test_product_examples():
    f = SparseTable((0,), (2,), {(0,): 2.0, (1,): 1.0})
    g = SparseTable((0, 1), (2, 2), {(0, 0): 1.0, (0, 1): 3.0, (1, 0): 2.0})
    assert sparse_product(f, g).entries == {(0, 0): 2.0, (0, 1): 6.0, (1, 0): 2.0}
    assert len(sparse_product(g, SparseTable((0, 1), (2, 2), {}))) == 0
    ones = sparse_from_dense(DenseFactor.constant(1.0, (0, 1), (2, 2)))
    assert sparse_product(g, ones).entries == g.entries


def test_sum_out_examples():
    t = SparseTable((0, 1), (2, 2), {(0, 0): 2.0, (0, 1): 6.0, (1, 0): 2.0})
    assert sparse_sum_out(t, []) is t
    assert sparse_sum_out(t, [1]).entries == {(0,): 8.0, (1,): 2.0}
    same = SparseTable((0, 1), (2, 2), {(0, 0): 1.0, (0, 1): 2.0})
    assert sparse_sum_out(same, [1]).entries == {(0,): 3.0}


def test_divide_examples():
    a = SparseTable((0, 1), (2, 2), {(0, 0): 2.0, (0, 1): 6.0})
    assert sparse_divide(a, a).entries == {(0, 0): 1.0, (0, 1): 1.0}
    assert sparse_divide(a, SparseTable((0,), (2,), {(0,): 2.0})).entries == {(0, 0): 1.0, (0, 1): 3.0}
    with pytest.raises(DivisionSupportError):
        sparse_divide(SparseTable((0,), (2,), {(0,): 2.0}), SparseTable((0,), (2,), {(1,): 5.0}))


def test_lossy_project_examples(f1):
    t = sparse_from_dense(f1)
    assert sparse_lossy_project(t, SupportRelation.full((0, 1), (2, 2))).entries == t.entries
    diag = SupportRelation((0, 1), (2, 2), {(0, 0), (1, 1)})
    assert sparse_lossy_project(t, diag).entries == {(0, 0): 3.0}
    assert len(sparse_lossy_project(t, SupportRelation((0, 1), (2, 2), set()))) == 0


def test_support_relation_projection():
    s = SupportRelation((0, 1, 2), (2, 2, 2), {(0, 1, 1), (1, 0, 0), (1, 0, 1)})
    assert s.project((0, 1)).tuples == {(0, 1), (1, 0)}
    assert s.mask().sum() == 3


@given(dense_factors(max_vars=3), dense_factors(max_vars=3))
def test_product_matches_dense(f, g):
    if any(f.card_map.get(v, c) != c for v, c in g.card_map.items()):
        return
    with metered() as meter:
        sp = sparse_to_dense(sparse_product(sparse_from_dense(f), sparse_from_dense(g)))
    assert np.allclose(sp.values, factor_product(f, g).values)
    assert meter.sparse_visits >= 0


@given(dense_factors(max_vars=4), st.data())
def test_marginalize_matches_dense(f, data):
    keep = data.draw(st.sets(st.sampled_from(f.scope))) if f.scope else set()
    sp = sparse_to_dense(sparse_marginalize(sparse_from_dense(f), keep))
    assert np.allclose(sp.values, factor_marginalize(f, keep).values)


@given(dense_factors(max_vars=3, allow_zero=True), st.data())
def test_divide_matches_dense_on_support(f, data):
    keep = data.draw(st.sets(st.sampled_from(f.scope))) if f.scope else set()
    g = factor_marginalize(f, keep)  # support(g) covers the projection of support(f)
    sp = sparse_to_dense(sparse_divide(sparse_from_dense(f), sparse_from_dense(g)))
    assert np.allclose(sp.values, factor_divide(f, g).values)


@given(dense_factors(max_vars=3))
def test_dense_round_trip(f):
    back = sparse_to_dense(sparse_from_dense(f))
    assert back.scope == f.scope and np.array_equal(back.values, f.values)
