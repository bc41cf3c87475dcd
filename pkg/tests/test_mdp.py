"""
Tests for utils/mdp.py - policies, induced chains, CI under a policy, sampling
"""
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent))

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from utils.common import AdmissibilityError, GuardError, ValidationError, make_rng
from utils.core import LookupTable, constant_table, identity_table
from utils.mdp import (
    MdpSpec, StationaryPolicy, build_ideal_mdp, check_weakly_connected, ci_check_under_policy,
    ci_checks_under_policy, deterministic_policy, exact_argmax_under_policy, exact_i1_under_policy,
    induced_chain, mdp_from_json, mdp_to_json, policy_from_json, policy_mixture, policy_to_json,
    random_ideal_mdp, random_mdp, random_state_independent_policy, random_stochastic_policy,
    sample_mdp, state_independent_policy, uniform_policy,
)
from utils.oracle import exact_ik
from utils.processes import enumerate_family, sample_chain

TWO_ACTIONS = [[[0.9, 0.1], [0.1, 0.9]], [[0.7, 0.3], [0.2, 0.8]]]


def ideal_mdp():
    return build_ideal_mdp(TWO_ACTIONS, (2, 2), ([0.3, 0.7], [0.6, 0.4]))


def test_spec_validation():
    """(x, a) rows must be stochastic; policies must be probability rows"""
    with pytest.raises(ValidationError):
        MdpSpec(transition=np.ones((2, 1, 2)))
    with pytest.raises(ValidationError):
        MdpSpec(transition=np.ones((2, 2)))
    with pytest.raises(ValidationError):
        StationaryPolicy(probs=np.array([[0.5, 0.6], [0.5, 0.5]]))
    print("✅ test_spec_validation passed")


def test_policies():
    """Constructors and the stochastic floor"""
    assert uniform_policy(3, 2).alpha_floor == 0.5
    det = deterministic_policy([1, 0, 1], 2)
    assert det.probs.tolist() == [[0, 1], [1, 0], [0, 1]]
    assert not det.stochastic

    rng = make_rng(0)
    pol = random_stochastic_policy(rng, 4, 3, alpha=0.1)
    assert pol.stochastic and pol.alpha_floor >= 0.1 - 1e-12
    pol = random_state_independent_policy(rng, 4, 2, alpha=0.1)
    assert np.allclose(pol.probs, pol.probs[0])

    mixed = policy_mixture(uniform_policy(3, 2), det, 0.5)
    assert mixed.stochastic
    assert np.allclose(mixed.probs[0], [0.25, 0.75])

    with pytest.raises(ValidationError):
        random_stochastic_policy(rng, 2, 2, alpha=0.6)
    with pytest.raises(ValidationError):
        policy_mixture(uniform_policy(3, 2), det, 1.5)
    print("✅ test_policies passed")


def test_induced_chain():
    """Single action, uniform mixture, deterministic selection"""
    P = np.array([[[0.5, 0.5], [0.0, 1.0]], [[1.0, 0.0], [0.25, 0.75]]])
    mdp = MdpSpec(transition=P)
    assert np.allclose(induced_chain(mdp, uniform_policy(2, 2)).transition, [[0.25, 0.75], [0.625, 0.375]])
    det = induced_chain(mdp, deterministic_policy([1, 0], 2))
    assert np.allclose(det.transition, [[0.0, 1.0], [1.0, 0.0]])

    single = MdpSpec(transition=P[:, :1, :])
    assert np.allclose(induced_chain(single, uniform_policy(2, 1)).transition, P[:, 0, :])
    print("✅ test_induced_chain passed")


def test_induced_chain_linear_in_policy():
    """Mixing two policies mixes their induced chains"""
    rng = make_rng(17)
    for _ in range(5):
        mdp = random_mdp(rng, 4, 3)
        p1 = random_stochastic_policy(rng, 4, 3)
        p2 = random_stochastic_policy(rng, 4, 3)
        for lam in (0.0, 0.3, 0.5, 1.0):
            mixed = induced_chain(mdp, policy_mixture(p1, p2, lam)).transition
            expected = lam * induced_chain(mdp, p1).transition + (1.0 - lam) * induced_chain(mdp, p2).transition
            assert np.abs(mixed - expected).max() <= 1e-14
    print("✅ test_induced_chain_linear_in_policy passed")


def test_weak_connectivity():
    """Absorbing states break it; cycles and dense MDPs have it"""
    absorbing = MdpSpec(transition=np.stack([np.eye(2), np.eye(2)], axis=1))
    check = check_weakly_connected(absorbing)
    assert not check.connected
    assert check.witness == (0, 1)

    cycle = np.roll(np.eye(3), 1, axis=1)
    assert check_weakly_connected(MdpSpec(transition=np.stack([cycle, cycle], axis=1))).connected
    assert check_weakly_connected(random_mdp(make_rng(1), 4, 2)).connected
    print("✅ test_weak_connectivity passed")


def test_inadmissible_policy():
    """A policy with two closed classes is rejected"""
    P = np.zeros((2, 2, 2))
    P[:, 0, :] = np.eye(2)
    P[:, 1, :] = [[0.0, 1.0], [1.0, 0.0]]
    mdp = MdpSpec(transition=P)
    with pytest.raises(AdmissibilityError):
        exact_i1_under_policy(mdp, deterministic_policy([0, 0], 2), identity_table(2))
    print("✅ test_inadmissible_policy passed")


def test_ci_under_policy():
    """Ideal MDPs pass under any stochastic policy; constant f on action-dependent dynamics fails"""
    mdp, f = ideal_mdp()
    rng = make_rng(3)
    for _ in range(5):
        policy = random_stochastic_policy(rng, mdp.n_states, mdp.n_actions)
        assert ci_check_under_policy(mdp, policy, f).passed
    assert ci_check_under_policy(mdp, uniform_policy(4, 2), identity_table(4)).passed

    check = ci_check_under_policy(mdp, uniform_policy(4, 2), constant_table(4))
    assert not check.passed
    assert check.max_violation > 0.0
    print("✅ test_ci_under_policy passed")


def test_ci_own_action_reading():
    """Conditioning on f(X_0) alone fails for state-dependent policies"""
    mdp, f = ideal_mdp()
    policy = StationaryPolicy(probs=np.array([[0.9, 0.1], [0.2, 0.8], [0.5, 0.5], [0.3, 0.7]]))
    assert ci_check_under_policy(mdp, policy, f, own_action=True).passed
    assert not ci_check_under_policy(mdp, policy, f, own_action=False).passed
    # with a state-independent policy both readings agree
    flat = state_independent_policy([0.4, 0.6], 4)
    assert ci_check_under_policy(mdp, flat, f, own_action=False).passed
    print("✅ test_ci_own_action_reading passed")


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**32))
def test_ci_verdicts_policy_invariant(seed):
    """Every candidate gets the same verdict under two stochastic policies"""
    rng = make_rng(seed)
    mdp, _ = random_ideal_mdp(rng, 2, 4, 2)
    family = enumerate_family(4, 2)
    first = ci_checks_under_policy(mdp, random_stochastic_policy(rng, 4, 2), family)
    second = ci_checks_under_policy(mdp, random_stochastic_policy(rng, 4, 2), family)
    assert [c.passed for c in first] == [c.passed for c in second]


def test_exact_i1_under_policy():
    """Single action reduces to the chain; the ideal map attains the maximum"""
    P = np.array([[[0.75, 0.25]], [[0.5, 0.5]]])
    single = MdpSpec(transition=P)
    chain = induced_chain(single, uniform_policy(2, 1))
    assert exact_i1_under_policy(single, uniform_policy(2, 1), identity_table(2)) == pytest.approx(
        exact_ik(chain, identity_table(2), 1)
    )

    mdp, f = ideal_mdp()
    policy = uniform_policy(4, 2)
    assert exact_i1_under_policy(mdp, policy, constant_table(4)) == 0.0
    family = enumerate_family(4, 2)
    best = exact_argmax_under_policy(mdp, policy, family)
    top = exact_i1_under_policy(mdp, policy, family[best])
    assert exact_i1_under_policy(mdp, policy, f) == pytest.approx(top, abs=1e-12)
    assert ci_check_under_policy(mdp, policy, family[best]).passed
    print("✅ test_exact_i1_under_policy passed")


def test_argmax_needs_state_independent_exploration():
    """State-independent exploration always picks a CI map; state-dependent policies can pick a non-CI map"""
    independent_misses = dependent_misses = 0
    for i in range(20):
        rng = make_rng(3, i)
        mdp, _ = random_ideal_mdp(rng, 2, int(rng.integers(3, 7)), 2)
        family = enumerate_family(mdp.n_states, 2)
        for _ in range(5):
            flat = random_state_independent_policy(rng, mdp.n_states, 2)
            best = exact_argmax_under_policy(mdp, flat, family)
            independent_misses += not ci_check_under_policy(mdp, flat, family[best]).passed

            varied = random_stochastic_policy(rng, mdp.n_states, 2)
            assert not varied.state_independent
            best = exact_argmax_under_policy(mdp, varied, family)
            dependent_misses += not ci_check_under_policy(mdp, varied, family[best]).passed
    assert independent_misses == 0
    assert dependent_misses > 0
    assert uniform_policy(4, 2).state_independent
    print("✅ test_argmax_needs_state_independent_exploration passed")


def test_window_guard():
    """(|X||A|)^3 above the guard is refused"""
    mdp = random_mdp(make_rng(0), 250, 2)
    with pytest.raises(GuardError):
        ci_check_under_policy(mdp, uniform_policy(250, 2), identity_table(250))
    print("✅ test_window_guard passed")


def test_sample_mdp():
    """Deterministic trajectories with an action column"""
    mdp, _ = ideal_mdp()
    policy = uniform_policy(4, 2)
    a = sample_mdp(mdp, policy, 50, seed=9)
    b = sample_mdp(mdp, policy, 50, seed=9)
    assert np.array_equal(a.observations, b.observations)
    assert np.array_equal(a.actions, b.actions)
    assert a.generator == "mdp"
    assert set(a.actions.tolist()) <= {0, 1}
    print("✅ test_sample_mdp passed")


def test_sample_mdp_action_frequencies():
    """Uniform exploration picks each action half the time in every state"""
    mdp, _ = ideal_mdp()
    trajectory = sample_mdp(mdp, uniform_policy(4, 2), 100_000, seed=4)
    for x in range(4):
        actions = trajectory.actions[trajectory.observations == x]
        assert len(actions) > 1000
        assert abs(actions.mean() - 0.5) <= 0.02
    print("✅ test_sample_mdp_action_frequencies passed")


def test_single_action_matches_chain():
    """With one action the state path equals sample_chain on the induced chain"""
    P = np.array([[[0.75, 0.25]], [[0.5, 0.5]]])
    mdp = MdpSpec(transition=P)
    policy = uniform_policy(2, 1)
    path = sample_mdp(mdp, policy, 200, seed=4).observations
    chain_path = sample_chain(induced_chain(mdp, policy), 200, seed=4).observations
    assert np.array_equal(path, chain_path)
    print("✅ test_single_action_matches_chain passed")


def test_json():
    """MDP and policy JSON"""
    mdp, _ = ideal_mdp()
    back = mdp_from_json(mdp_to_json(mdp))
    assert np.array_equal(back.transition, mdp.transition)
    policy = random_stochastic_policy(make_rng(2), 4, 2)
    assert np.array_equal(policy_from_json(policy_to_json(policy)).probs, policy.probs)
    with pytest.raises(ValidationError):
        mdp_from_json({"n_states": 2})
    print("✅ test_json passed")


if __name__ == "__main__":
    test_spec_validation()
    test_policies()
    test_induced_chain()
    test_induced_chain_linear_in_policy()
    test_weak_connectivity()
    test_inadmissible_policy()
    test_ci_under_policy()
    test_ci_own_action_reading()
    test_ci_verdicts_policy_invariant()
    test_exact_i1_under_policy()
    test_argmax_needs_state_independent_exploration()
    test_window_guard()
    test_sample_mdp()
    test_sample_mdp_action_frequencies()
    test_single_action_matches_chain()
    test_json()
    print("\n✅ All MDP tests passed")
