"""
Tests for utils/estimators.py - plug-in entropy / information estimates
"""
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent))

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from utils.common import SequenceTooShortError, ValidationError
from utils.core import LookupTable, ObservationSeries, constant_table, identity_table, permute_labels
from utils.estimators import (
    binary_entropy, binary_entropy_inverse, entropy, entropy_from_counts, h0_hat,
    hk_hat, iinf_hat, ik_hat, ik_hat_symbols, schedule_k,
)


def series(values):
    return ObservationSeries(observations=np.array(values))


def test_entropy_examples():
    """Entropy of small probability vectors"""
    assert entropy([0.5, 0.5]) == pytest.approx(1.0)
    assert entropy([1.0, 0.0]) == 0.0
    assert entropy([0.9, 0.1]) == pytest.approx(0.468996, abs=1e-6)
    with pytest.raises(ValidationError):
        entropy([0.5, 0.6])
    with pytest.raises(ValidationError):
        entropy([1.5, -0.5])
    print("✅ test_entropy_examples passed")


def test_h0_hat():
    """Marginal entropy of the representation process"""
    ident = identity_table(2)
    assert h0_hat(ident, series([0, 1, 0, 1])) == pytest.approx(1.0)
    assert h0_hat(constant_table(2), series([0, 1, 0, 1])) == 0.0
    assert h0_hat(ident, series([0, 0, 0, 1])) == pytest.approx(0.811278, abs=1e-6)
    print("✅ test_h0_hat passed")


def test_ik_hat_examples():
    """Plug-in I_k on short sequences"""
    ident = identity_table(2)
    alternating = series([i % 2 for i in range(100)])
    assert ik_hat(ident, alternating, 1).value == pytest.approx(1.0, abs=1e-3)
    assert ik_hat(constant_table(2), alternating, 1).value == 0.0

    est = ik_hat(ident, series([0, 0, 1, 1]), 1)
    assert est.value == pytest.approx(0.251629, abs=1e-6)
    assert est.k_used == 1
    assert est.n_effective == 3
    print("✅ test_ik_hat_examples passed")


def test_hk_hat_examples():
    """Plug-in h_k"""
    ident = identity_table(2)
    assert hk_hat(ident, series([0, 0, 1, 1]), 1) == pytest.approx(0.666667, abs=1e-6)
    assert hk_hat(ident, series([i % 2 for i in range(50)]), 1) == pytest.approx(0.0, abs=1e-12)
    print("✅ test_hk_hat_examples passed")


def test_ik_hat_errors():
    """k >= 1 and n > k are required"""
    ident = identity_table(2)
    with pytest.raises(ValidationError):
        ik_hat(ident, series([0, 1, 0]), 0)
    with pytest.raises(SequenceTooShortError):
        ik_hat(ident, series([0, 1]), 2)
    print("✅ test_ik_hat_errors passed")


def test_sparse_support_flag():
    """|Y|^(k+1) > 10 * n_blocks is flagged"""
    est = ik_hat_symbols(np.array([0, 1, 2, 3, 0, 1]), 2, 4)
    assert est.sparse_support
    est = ik_hat_symbols(np.array([i % 2 for i in range(1000)]), 1, 2)
    assert not est.sparse_support
    print("✅ test_sparse_support_flag passed")


def test_schedule_k():
    """k_n schedule examples"""
    assert schedule_k(100, 2) == 2
    assert schedule_k(10**6, 2) == 4
    assert schedule_k(2, 2) == 1
    assert schedule_k(2, 5) == 1
    with pytest.raises(ValidationError):
        schedule_k(1, 2)
    print("✅ test_schedule_k passed")


def test_iinf_hat_cycle():
    """Deterministic alternation carries one full bit"""
    est = iinf_hat(identity_table(2), series([i % 2 for i in range(10_000)]))
    assert est.value == pytest.approx(1.0, abs=1e-6)
    assert est.k_used == schedule_k(10_000, 2)
    print("✅ test_iinf_hat_cycle passed")


def test_binary_entropy_inverse():
    """Bisection inverse on [0, 1/2]"""
    assert binary_entropy_inverse(1.0) == 0.5
    assert binary_entropy_inverse(0.0) == 0.0
    assert binary_entropy_inverse(0.468996) == pytest.approx(0.1, abs=1e-6)
    with pytest.raises(ValidationError):
        binary_entropy_inverse(1.5)
    print("✅ test_binary_entropy_inverse passed")


@settings(max_examples=50, deadline=None)
@given(p=st.floats(min_value=0.0, max_value=0.5))
def test_binary_entropy_inverse_property(p):
    """h^-1(h(p)) = p on [0, 1/2]"""
    assert binary_entropy_inverse(binary_entropy(p)) == pytest.approx(p, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(
    symbols=st.lists(st.integers(min_value=0, max_value=2), min_size=5, max_size=80),
    k=st.integers(min_value=1, max_value=3),
    perm=st.permutations([0, 1, 2]),
)
def test_relabeling_invariance(symbols, k, perm):
    """Relabeling Y leaves I_k bit-identical"""
    s = series(symbols)
    f = LookupTable(alphabet_size=3, table=np.array([0, 1, 2]))
    g = permute_labels(f, perm)
    assert ik_hat(f, s, k).value == ik_hat(g, s, k).value


@settings(max_examples=40, deadline=None)
@given(
    symbols=st.lists(st.integers(min_value=0, max_value=3), min_size=8, max_size=80),
    k=st.integers(min_value=1, max_value=3),
)
def test_ik_hat_range(symbols, k):
    """0 <= I_k <= log2 |Y|"""
    value = ik_hat_symbols(np.array(symbols), k, 4).value
    assert 0.0 <= value <= math.log2(4) + 1e-12


@settings(max_examples=30, deadline=None)
@given(counts=st.lists(st.integers(min_value=0, max_value=50), min_size=1, max_size=12))
def test_entropy_from_counts_bounds(counts):
    """0 <= H <= log2(number of nonzero cells)"""
    value = entropy_from_counts(counts)
    nonzero = sum(1 for c in counts if c > 0)
    assert value >= 0.0
    if nonzero <= 1:
        assert value == 0.0
    else:
        assert value <= math.log2(nonzero) + 1e-12


@settings(max_examples=40, deadline=None)
@given(symbols=st.lists(st.integers(min_value=0, max_value=2), min_size=5, max_size=80))
def test_ik_hat_time_reversal(symbols):
    """At k = 1 the pair counts are symmetric under reversing the series"""
    f = identity_table(3)
    forward = ik_hat(f, series(symbols), 1).value
    backward = ik_hat(f, series(symbols[::-1]), 1).value
    assert forward == pytest.approx(backward, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(
    p=st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=4, max_size=4),
    q=st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=4, max_size=4),
    lam=st.floats(min_value=0.0, max_value=1.0),
)
def test_entropy_concave(p, q, lam):
    """H(lam p + (1 - lam) q) >= lam H(p) + (1 - lam) H(q)"""
    p, q = np.array(p) + 1e-3, np.array(q) + 1e-3
    p, q = p / p.sum(), q / q.sum()
    mixed = entropy(lam * p + (1.0 - lam) * q)
    assert mixed >= lam * entropy(p) + (1.0 - lam) * entropy(q) - 1e-12


def test_binary_entropy_inverse_monotone():
    """h^-1 is nondecreasing on [0, 1]"""
    values = [binary_entropy_inverse(t) for t in np.linspace(0.0, 1.0, 201)]
    assert all(b >= a for a, b in zip(values, values[1:]))
    assert values[0] == 0.0 and values[-1] == 0.5
    print("✅ test_binary_entropy_inverse_monotone passed")


if __name__ == "__main__":
    test_entropy_examples()
    test_h0_hat()
    test_ik_hat_examples()
    test_hk_hat_examples()
    test_ik_hat_errors()
    test_sparse_support_flag()
    test_schedule_k()
    test_iinf_hat_cycle()
    test_binary_entropy_inverse()
    test_binary_entropy_inverse_property()
    test_relabeling_invariance()
    test_ik_hat_range()
    test_entropy_from_counts_bounds()
    test_ik_hat_time_reversal()
    test_entropy_concave()
    test_binary_entropy_inverse_monotone()
    print("\n✅ All estimator tests passed")
