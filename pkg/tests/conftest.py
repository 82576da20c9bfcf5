import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from smp.factor import DenseFactor, GraphicalModel

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def random_factor(rng, scope, cards, zero_prob=0.0):
    size = int(np.prod([cards[v] for v in scope])) if scope else 1
    vals = rng.uniform(0.1, 2.0, size=size)
    if zero_prob:
        vals[rng.random(size) < zero_prob] = 0.0
    return DenseFactor(scope, [cards[v] for v in scope], vals)


def random_model(rng, n, n_factors=None, max_arity=3, zero_prob=0.0, max_card=2):
    """Connected-ish random model; every variable gets a unary factor."""
    cards = [int(rng.integers(2, max_card + 1)) for _ in range(n)]
    factors = [random_factor(rng, (v,), cards) for v in range(n)]
    for _ in range(n if n_factors is None else n_factors):
        arity = int(rng.integers(1, min(max_arity, n) + 1))
        scope = sorted(rng.choice(n, size=arity, replace=False).tolist())
        factors.append(random_factor(rng, scope, cards, zero_prob))
    return GraphicalModel(cards, factors)


def tiny_model():
    """f(A) = [2,1], g(A,B) = [[1,3],[2,0]]; Z = 10."""
    return GraphicalModel(
        [2, 2],
        [DenseFactor((0,), (2,), [2, 1]), DenseFactor((0, 1), (2, 2), [1, 3, 2, 0])],
    )


F1_VALUES = [3, 3, 2, 0]  # F1(A,B): 00->3, 01->3, 10->2, 11->0


@pytest.fixture
def f1():
    return DenseFactor((0, 1), (2, 2), F1_VALUES)


@st.composite
def dense_factors(draw, max_vars=3, max_card=3, allow_zero=True, scope=None):
    if scope is None:
        nvars = draw(st.integers(0, max_vars))
        scope = sorted(draw(st.sets(st.integers(0, 5), min_size=nvars, max_size=nvars)))
    cards = [draw(st.integers(2, max_card)) for _ in scope]
    size = int(np.prod(cards)) if cards else 1
    elem = st.floats(0.0, 10.0) if allow_zero else st.floats(0.01, 10.0)
    if allow_zero:
        elem = st.one_of(st.just(0.0), elem)
    vals = draw(st.lists(elem, min_size=size, max_size=size))
    return DenseFactor(scope, cards, vals)


@st.composite
def small_models(draw, max_vars=5, zero_prob=0.3):
    seed = draw(st.integers(0, 2**31))
    n = draw(st.integers(1, max_vars))
    return random_model(np.random.default_rng(seed), n, zero_prob=zero_prob)


ACCEPTANCE_LINES = {}


def report(number, name, ok, detail=""):
    """Record one acceptance verdict; printed in the terminal summary."""
    line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {name}"
    ACCEPTANCE_LINES[number] = line + (f"  ({detail})" if detail else "")
    print(ACCEPTANCE_LINES[number])
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
