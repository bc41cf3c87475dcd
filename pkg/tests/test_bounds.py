"""
Tests for utils/bounds.py - beta-mixing deviation bounds
"""
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent))

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from utils.bounds import (
    BetaSchedule, BoundParams, bound_crossover_n, delta_bound, geometric_beta_schedule,
    inner_epsilon, q_bound, required_n, deviation_bound, deviation_monte_carlo,
    tv_deviation_bound, zhang_bound,
)
from utils.common import UnattainableError, ValidationError
from utils.core import LookupTable
from utils.estimators import binary_entropy, binary_entropy_inverse
from utils.oracle import MarkovChainSpec


def test_delta_bound_example():
    """d=1, eps=0.1, n=1e4, gamma=0.9 gives 0.2656 + 7.0601e4"""
    value = delta_bound(1, 0.1, 10**4, 0.9)
    assert value == pytest.approx(0.2656 + 7.0601e4, rel=1e-3)
    # gamma -> 0 leaves only the tail term
    assert delta_bound(1, 0.1, 10**4, 0.0) == pytest.approx(8 * 10**4 * math.exp(-100 * 0.01 / 8))
    with pytest.raises(ValidationError):
        delta_bound(1, 0.1, 10**4, 1.0)
    print("✅ test_delta_bound_example passed")


def test_q_bound():
    """iid mixing (beta = 0) with t_n = 1 leaves 8 exp(-n eps^2 / 8)"""
    zero = BetaSchedule(values=(0.0,))
    assert q_bound(zero, 1, 0.5, 100, 1) == pytest.approx(8 * math.exp(-100 * 0.25 / 8))

    beta = geometric_beta_schedule(0.5, 20)
    value = q_bound(beta, 1, 10.0, 100, 10)
    assert value <= 1e-40 + 100 * 0.5 ** 10
    with pytest.raises(ValidationError):
        q_bound(beta, 1, 0.5, 100, 0)
    print("✅ test_q_bound passed")


def test_beta_schedule():
    """Nonincreasing coefficients in [0, 1], last value reused past t_max"""
    beta = geometric_beta_schedule(0.5, 3)
    assert beta.values == (0.5, 0.25, 0.125)
    assert beta.beta(10) == 0.125
    with pytest.raises(ValidationError):
        BetaSchedule(values=(0.1, 0.2))
    with pytest.raises(ValidationError):
        BetaSchedule(values=())
    print("✅ test_beta_schedule passed")


def test_deviation_bound_composition():
    """2 |Y|^(k+1) Delta(7kd, eps', n-k, gamma) with eps' from inner_epsilon"""
    params = BoundParams(d=1, epsilon=0.1, n=10**4, gamma=0.9)
    inner = min(0.1 / 48, binary_entropy_inverse(0.1 / 24))
    eps, saturated = inner_epsilon(params)
    assert eps == pytest.approx(inner)
    assert not saturated
    bound = deviation_bound(params)
    assert bound.value == pytest.approx(8 * delta_bound(7, inner, 9999, 0.9))
    assert bound.value > 0 and bound.vacuous
    print("✅ test_deviation_bound_composition passed")


def test_inner_epsilon_saturates():
    """Entropy argument above 1 is clipped and flagged"""
    params = BoundParams(d=1, epsilon=30.0, n=10**6, gamma=0.5)
    _, saturated = inner_epsilon(params)
    assert saturated
    assert deviation_bound(params).saturated
    print("✅ test_inner_epsilon_saturates passed")


def test_params_validation():
    """Out-of-range parameters are rejected"""
    for kwargs in (
        dict(d=0, epsilon=0.1, n=10, gamma=0.5),
        dict(d=1, epsilon=0.0, n=10, gamma=0.5),
        dict(d=1, epsilon=0.1, n=10, gamma=1.0),
        dict(d=1, epsilon=0.1, n=10, gamma=0.5, alphabet_size=1),
    ):
        with pytest.raises(ValidationError):
            BoundParams(**kwargs)
    with pytest.raises(ValidationError):
        deviation_bound(BoundParams(d=1, epsilon=0.1, n=1, gamma=0.5))
    print("✅ test_params_validation passed")


@settings(max_examples=40, deadline=None)
@given(
    d=st.integers(min_value=1, max_value=4),
    eps=st.floats(min_value=0.05, max_value=2.0),
    gamma=st.floats(min_value=0.05, max_value=0.95),
    k=st.integers(min_value=1, max_value=3),
    Y=st.integers(min_value=2, max_value=4),
)
def test_monotone_past_crossover(d, eps, gamma, k, Y):
    """Past the crossover the bound does not grow with n, eps or shrink with gamma"""
    base = BoundParams(d=d, epsilon=eps, n=10, gamma=gamma, k=k, alphabet_size=Y)
    n0 = bound_crossover_n(base)
    values = [deviation_bound(base.with_n(n0 * m)).value for m in (1, 2, 4)]
    for a, b in zip(values, values[1:]):
        assert b <= a * (1 + 1e-12) or math.isinf(a)

    at = base.with_n(n0)
    looser = BoundParams(d=d, epsilon=2 * eps, n=n0, gamma=gamma, k=k, alphabet_size=Y)
    assert deviation_bound(looser).value <= deviation_bound(at).value * (1 + 1e-12)
    slower = BoundParams(d=d, epsilon=eps, n=n0, gamma=min(0.99, gamma + 0.04), k=k, alphabet_size=Y)
    assert deviation_bound(slower).value >= deviation_bound(at).value * (1 - 1e-12)
    bigger = BoundParams(d=d + 1, epsilon=eps, n=n0, gamma=gamma, k=k, alphabet_size=Y)
    assert deviation_bound(bigger).value >= deviation_bound(at).value * (1 - 1e-12)


def test_tv_deviation_bound():
    """|Y|^(k+1) Delta(7kd, eps / |Y|^(k+1), n-k, gamma)"""
    params = BoundParams(d=2, epsilon=0.4, n=10**5, gamma=0.7, k=2, alphabet_size=3)
    expected = 27 * delta_bound(28, 0.4 / 27, 10**5 - 2, 0.7)
    assert tv_deviation_bound(params).value == pytest.approx(expected)
    print("✅ test_tv_deviation_bound passed")


def test_required_n_example():
    """delta=0.5, k=1, |Y|=2, d=1, eps=0.5, gamma=0.5"""
    params = BoundParams(d=1, epsilon=0.5, n=2, gamma=0.5)
    with pytest.raises(UnattainableError):
        required_n(params, 0.5)

    n = required_n(params, 0.5, cap=10**18)
    assert n > bound_crossover_n(params)
    assert deviation_bound(params.with_n(n)).value <= 0.5
    assert deviation_bound(params.with_n(n - 1)).value > 0.5
    print("✅ test_required_n_example passed")


def test_required_n_monotone():
    """Looser eps never needs more samples; slower mixing never needs fewer"""
    base = BoundParams(d=1, epsilon=24.0, n=2, gamma=0.8)
    n_tight = required_n(base, 0.5)
    n_loose = required_n(BoundParams(d=1, epsilon=30.0, n=2, gamma=0.8), 0.5)
    n_slow = required_n(BoundParams(d=1, epsilon=24.0, n=2, gamma=0.9), 0.5)
    assert n_loose <= n_tight <= n_slow
    with pytest.raises(ValidationError):
        required_n(base, 1.5)
    print("✅ test_required_n_monotone passed")


def test_zhang_bound():
    """3 (k+1) alpha log2|Y| + 3 h(alpha)"""
    assert zhang_bound(1, 2, 0.0).value == 0.0
    assert zhang_bound(1, 2, 0.1).value == pytest.approx(0.6 + 3 * binary_entropy(0.1), abs=1e-12)
    assert zhang_bound(1, 2, 0.1).value == pytest.approx(2.006988, abs=5e-6)
    capped = zhang_bound(2, 4, 1.5)
    assert capped.saturated
    assert capped.value == pytest.approx(2 * 3 * 2.0)
    with pytest.raises(ValidationError):
        zhang_bound(1, 2, -0.1)
    print("✅ test_zhang_bound passed")


def test_deviation_monte_carlo():
    """Sup-deviation frequency stays under the bound plus three standard errors"""
    spec = MarkovChainSpec(transition=np.array([[0.9, 0.1], [0.1, 0.9]]), stationary=np.array([0.5, 0.5]))
    family = [LookupTable(alphabet_size=2, table=np.array(t)) for t in ([0, 1], [1, 0])]
    params = BoundParams(d=1, epsilon=24.0, n=2000, gamma=0.8)
    check = deviation_monte_carlo(spec, family, params, replicates=3, seed=0)
    assert check.replicates == 3
    assert check.exceedances == 0
    assert check.passed
    print("✅ test_deviation_monte_carlo passed")


if __name__ == "__main__":
    test_delta_bound_example()
    test_q_bound()
    test_beta_schedule()
    test_deviation_bound_composition()
    test_inner_epsilon_saturates()
    test_params_validation()
    test_monotone_past_crossover()
    test_tv_deviation_bound()
    test_required_n_example()
    test_required_n_monotone()
    test_zhang_bound()
    test_deviation_monte_carlo()
    print("\n✅ All bound tests passed")
