"""
性质验证套件 (verify --suite)
每个套件返回 SuiteResult，violations > 0 即失败，CLI 据此退出码 4

所有随机实例都由 (seed, stream) 决定，重复运行结果逐字节一致。
"""

import math
from dataclasses import dataclass

import numpy as np

from utils.bounds import (
    BoundParams, bound_crossover_n, delta_bound, geometric_beta_schedule,
    inner_epsilon, q_bound, required_n, deviation_bound, deviation_monte_carlo,
    tv_deviation_bound, zhang_bound,
)
from utils.common import ValidationError, format_number, make_rng
from utils.core import LookupTable, apply_representation, collect_blocks
from utils.estimators import binary_entropy, block_total_variation, ik_hat
from utils.logger import get_logger
from utils.mdp import (
    build_ideal_mdp, ci_checks_under_policy, exact_argmax_under_policy,
    random_ideal_mdp, random_state_independent_policy, random_stochastic_policy,
)
from utils.oracle import (
    MarkovChainSpec, chain_rule_identity_check, ci_check_markov,
    entropy_rate_sandwich, exact_block_distribution, exact_hk, exact_ik,
    exact_past_information, family_rate_gap, induced_label_transition, pair_information_identity,
    stationary_distribution, strictness_order,
)
from utils.processes import (
    build_ideal_chain, enumerate_family, mixing_profile, random_chain,
    random_ideal_recipe, sample_chain, uniform_recipe,
)
from utils.selection import FixedK, select_active, select_passive

MODULE = "verify"
logger = get_logger("tsinfo.verify")

# 各套件使用互不重叠的 stream 区间
STREAM_BLOCK = 1_000_000

SYMMETRIC_P = 0.1
RECOVERY_T = [[0.9, 0.1], [0.1, 0.9]]


@dataclass(frozen=True)
class SuiteResult:
    name: str
    cases: int
    violations: int
    detail: str = ""

    @property
    def passed(self):
        return self.violations == 0

    def as_row(self):
        return {
            "suite": self.name,
            "cases": self.cases,
            "violations": self.violations,
            "passed": self.passed,
            "detail": self.detail,
        }


def _rng(seed, suite_offset, i):
    return make_rng(seed, suite_offset * STREAM_BLOCK + i)


def _symmetric_chain(p=SYMMETRIC_P):
    return MarkovChainSpec(transition=np.array([[1 - p, p], [p, 1 - p]]), stationary=np.array([0.5, 0.5]))


def _ideal_instance(seed, offset, i, n_labels, max_states):
    rng = _rng(seed, offset, i)
    n_states = int(rng.integers(n_labels, max_states + 1))
    spec, f, _ = build_ideal_chain(random_ideal_recipe(rng, n_labels, n_states))
    return rng, spec, f


# ============== Oracle-level Suites ==============

def suite_ideal_ci(seed=0, recipes=500, max_labels=3, max_states=9):
    """build_ideal_chain output passes the CI check at 1e-12 and induces T exactly."""
    violations = 0
    worst = 0.0
    for i in range(recipes):
        rng = _rng(seed, 1, i)
        n_labels = int(rng.integers(2, max_labels + 1))
        n_states = int(rng.integers(n_labels, max_states + 1))
        recipe = random_ideal_recipe(rng, n_labels, n_states)
        spec, f, _ = build_ideal_chain(recipe)
        check = ci_check_markov(spec, f, tol=1e-12)
        label_error = float(np.abs(induced_label_transition(spec, f) - recipe.label_transition).max())
        worst = max(worst, check.max_violation)
        if not check.passed or label_error > 1e-12:
            violations += 1
    return SuiteResult("ideal-ci", recipes, violations, f"max CI violation {format_number(worst)}")


def suite_ci_optimality(seed=0, chains=100, max_states=6):
    """
    Over the full 2^|X| family: I_1(f) >= I_1(g) - 1e-12, and
    |I_1(f) - I_1(g)| <= 1e-9 exactly when g passes the CI check.
    """
    violations = cases = 0
    strict_orders = []
    for i in range(chains):
        _, spec, f = _ideal_instance(seed, 2, i, 2, max_states)
        i_f = exact_ik(spec, f, 1)
        for g in enumerate_family(spec.n_states, 2):
            cases += 1
            i_g = exact_ik(spec, g, 1)
            ci = ci_check_markov(spec, g).passed
            if i_f < i_g - 1e-12 or (abs(i_f - i_g) <= 1e-9) != ci:
                violations += 1
            if not ci:
                order = strictness_order(spec, f, g)
                if order is not None:
                    strict_orders.append(order)
    top = max(strict_orders) if strict_orders else 0
    return SuiteResult("ci-optimality", cases, violations, f"largest strictness order {top}")


def suite_markov_collapse(seed=0, chains=100, max_states=6, k_max=5):
    """
    I_k(f) = I_1(f) for k = 1..5 on ideal chains; for non-CI g, I_k is
    nondecreasing and h_k nonincreasing in k.
    """
    violations = cases = 0
    for i in range(chains):
        _, spec, f = _ideal_instance(seed, 2, i, 2, max_states)
        i_1 = exact_ik(spec, f, 1)
        for k in range(2, k_max + 1):
            cases += 1
            if abs(exact_ik(spec, f, k) - i_1) > 1e-9:
                violations += 1
        for g in enumerate_family(spec.n_states, 2):
            if ci_check_markov(spec, g).passed:
                continue
            info = [exact_ik(spec, g, k) for k in range(1, k_max + 1)]
            rate = [exact_hk(spec, g, k) for k in range(1, k_max + 1)]
            cases += 1
            if any(b < a - 1e-12 for a, b in zip(info, info[1:])) or any(b > a + 1e-12 for a, b in zip(rate, rate[1:])):
                violations += 1
    return SuiteResult("markov-collapse", cases, violations)


def suite_past_future(seed=0, chains=50, max_states=5, k_max=4):
    """I_k computed forward equals I(Y_0; Y_-1..Y_-k) on the time-reversed chain."""
    violations = cases = 0
    worst = 0.0
    for i in range(chains):
        rng = _rng(seed, 3, i)
        n_states = int(rng.integers(2, max_states + 1))
        spec = random_chain(rng, n_states)
        f = LookupTable(alphabet_size=2, table=rng.integers(0, 2, size=n_states))
        for k in range(1, k_max + 1):
            cases += 1
            gap = abs(exact_ik(spec, f, k) - exact_past_information(spec, f, k))
            worst = max(worst, gap)
            if gap > 1e-9:
                violations += 1
    return SuiteResult("past-future", cases, violations, f"max gap {format_number(worst)}")


def suite_pair_identity(seed=0, chains=50, max_states=6):
    """For CI f: I_1(f, g) = I_1(f) and the chain-rule identity holds, for any g."""
    violations = 0
    for i in range(chains):
        rng, spec, f = _ideal_instance(seed, 4, i, 2, max_states)
        g = LookupTable(alphabet_size=2, table=rng.integers(0, 2, size=spec.n_states))
        holds, _, _ = pair_information_identity(spec, f, g)
        chain_rule = chain_rule_identity_check(spec, f, g)
        sandwich = entropy_rate_sandwich(spec, f, 1)
        if not holds or not chain_rule.holds or sandwich.gap > 1e-9:
            violations += 1
    return SuiteResult("pair-identity", chains, violations)


def suite_rate_gap(seed=0, chains=30, max_states=5, k_max=4):
    """
    Largest sandwich gap over the full binary family, k = 1..k_max: it never
    grows with k, and is zero for the ideal map.
    """
    violations = cases = 0
    last_gaps = []
    for i in range(chains):
        _, spec, f = _ideal_instance(seed, 12, i, 2, max_states)
        family = enumerate_family(spec.n_states, 2)
        gaps = [family_rate_gap(spec, family, k) for k in range(1, k_max + 1)]
        cases += 1
        if any(b > a + 1e-12 for a, b in zip(gaps, gaps[1:])) or entropy_rate_sandwich(spec, f, 1).gap > 1e-9:
            violations += 1
        last_gaps.append(gaps[-1])
    return SuiteResult("rate-gap", cases, violations, f"largest gap at k={k_max}: {format_number(max(last_gaps))}")


def suite_stationary(seed=0, chains=1000, max_states=30):
    violations = 0
    worst = 0.0
    for i in range(chains):
        rng = _rng(seed, 5, i)
        spec = random_chain(rng, int(rng.integers(2, max_states + 1)))
        pi = stationary_distribution(spec)
        residual = float(np.abs(pi @ spec.transition - pi).sum())
        worst = max(worst, residual)
        if residual > 1e-10 or pi.min() < 0 or abs(pi.sum() - 1.0) > 1e-12:
            violations += 1
    return SuiteResult("stationary", chains, violations, f"max residual {format_number(worst)}")


# ============== Estimator-level Suites ==============

def suite_estimator_consistency(seed=0, seeds=10, sizes=(100_000, 1_000_000), tolerances=(0.02, 0.005), required=9):
    """ik_hat on the symmetric p=0.1 chain against 1 - h(0.1)."""
    spec = _symmetric_chain()
    f = LookupTable(alphabet_size=2, table=np.array([0, 1]))
    exact = exact_ik(spec, f, 1)
    violations = int(abs(exact - (1.0 - binary_entropy(SYMMETRIC_P))) > 1e-12)
    hits = []
    for n, tol in zip(sizes, tolerances):
        close = 0
        for s in range(seeds):
            estimate = ik_hat(f, sample_chain(spec, n, seed, stream=6 * STREAM_BLOCK + s), 1).value
            close += abs(estimate - exact) <= tol
        hits.append(close)
        if close < min(required, seeds):
            violations += 1
    detail = ", ".join(f"n={n}: {h}/{seeds}" for n, h in zip(sizes, hits))
    return SuiteResult("estimator-consistency", len(sizes) * seeds + 1, violations, detail)


def suite_zhang(seed=0, tuples=100, n=2000, max_states=6):
    """|I_k - I_k_hat| <= zhang_bound(k, |Y|, alpha_hat) with alpha_hat the block TV."""
    violations = 0
    for i in range(tuples):
        rng = _rng(seed, 7, i)
        n_labels = int(rng.integers(2, 4))
        n_states = int(rng.integers(n_labels, max_states + 1))
        spec, f, _ = build_ideal_chain(random_ideal_recipe(rng, n_labels, n_states))
        if rng.random() < 0.5:
            # 不满足条件独立的 lumping 也要覆盖到
            f = LookupTable(alphabet_size=n_labels, table=rng.integers(0, n_labels, size=n_states))
        k = int(rng.integers(1, 4))
        series = sample_chain(spec, n, seed, stream=7 * STREAM_BLOCK + i)
        dist = collect_blocks(apply_representation(f, series), k, f.alphabet_size)
        alpha = block_total_variation(exact_block_distribution(spec, f, k), dist)
        deviation = abs(exact_ik(spec, f, k) - ik_hat(f, series, k).value)
        if deviation > zhang_bound(k, f.alphabet_size, alpha).value + 1e-12:
            violations += 1
    return SuiteResult("zhang", tuples, violations)


# ============== Selection Suites ==============

def suite_recovery(seed=0, seeds=20, n=100_000, required=19):
    """Full 16-map family on the (2,2) ideal chain: the selected map passes the CI check."""
    spec, _, _ = build_ideal_chain(uniform_recipe(RECOVERY_T, (2, 2)))
    family = enumerate_family(4, 2)
    good = 0
    for s in range(seeds):
        series = sample_chain(spec, n, seed, stream=8 * STREAM_BLOCK + s)
        report = select_passive(family, series, FixedK(1))
        good += ci_check_markov(spec, family[report.best_index]).passed
    violations = int(good < min(required, seeds))
    return SuiteResult("recovery", seeds, violations, f"{good}/{seeds} selections pass the CI check")


def suite_policy_invariance(seed=0, mdps=50, pairs=20, max_states=6):
    """CI-under-policy verdicts agree across random stochastic policies for every candidate."""
    violations = cases = 0
    for i in range(mdps):
        rng = _rng(seed, 9, i)
        mdp, _ = random_ideal_mdp(rng, 2, int(rng.integers(2, max_states + 1)), 2)
        family = enumerate_family(mdp.n_states, 2)
        for _ in range(pairs):
            first = random_stochastic_policy(rng, mdp.n_states, 2)
            second = random_stochastic_policy(rng, mdp.n_states, 2)
            a = [c.passed for c in ci_checks_under_policy(mdp, first, family)]
            b = [c.passed for c in ci_checks_under_policy(mdp, second, family)]
            cases += len(family)
            violations += sum(x != y for x, y in zip(a, b))
    return SuiteResult("policy-invariance", cases, violations)


def suite_selection_invariance(seed=0, mdps=20, policies=5, max_states=6):
    """
    The exact I_1 maximizer under each state-independent stochastic policy
    passes the CI check under every tested policy. Exploration is
    state-independent only: under a state-dependent policy the maximizer can
    fail the CI check.
    """
    violations = cases = 0
    for i in range(mdps):
        rng = _rng(seed, 10, i)
        mdp, _ = random_ideal_mdp(rng, 2, int(rng.integers(2, max_states + 1)), 2)
        family = enumerate_family(mdp.n_states, 2)
        exploring = [random_state_independent_policy(rng, mdp.n_states, 2) for _ in range(policies)]
        checking = exploring + [random_stochastic_policy(rng, mdp.n_states, 2) for _ in range(policies)]
        for policy in exploring:
            best = exact_argmax_under_policy(mdp, policy, family)
            for other in checking:
                cases += 1
                violations += not ci_checks_under_policy(mdp, other, [family[best]])[0].passed
    return SuiteResult("selection-invariance", cases, violations)


ACTIVE_T = [[[0.9, 0.1], [0.1, 0.9]], [[0.7, 0.3], [0.2, 0.8]]]
ACTIVE_EMISSIONS = ([0.3, 0.7], [0.6, 0.4])


def suite_active_selection(seed=0, seeds=20, n=100_000, required=19):
    """select_active under the uniform policy, verified under a held-out stochastic policy."""
    mdp, _ = build_ideal_mdp(ACTIVE_T, (2, 2), ACTIVE_EMISSIONS)
    family = enumerate_family(4, 2)
    good = 0
    for s in range(seeds):
        report = select_active(mdp, family, n, seed + s)
        held_out = random_stochastic_policy(_rng(seed, 11, s), mdp.n_states, mdp.n_actions)
        good += ci_checks_under_policy(mdp, held_out, [family[report.best_index]])[0].passed
    violations = int(good < min(required, seeds))
    return SuiteResult("active-selection", seeds, violations, f"{good}/{seeds} selections pass the CI check")


# ============== Bound Suites ==============

DELTA_EXAMPLE = 0.2656 + 7.0601e4
# tabulated from h(0.1) rounded to 0.468996, so only good to about 2e-6
ZHANG_EXAMPLE = 2.006988


def suite_bound_arithmetic(seed=0):
    checks = []
    delta = delta_bound(1, 0.1, 10_000, 0.9)
    checks.append(abs(delta - DELTA_EXAMPLE) <= 1e-3 * DELTA_EXAMPLE)

    n = 1000
    checks.append(math.isclose(
        q_bound(geometric_beta_schedule(0.0, 1), 1, 0.3, n, 1), 8 * math.exp(-n * 0.09 / 8), rel_tol=1e-12,
    ))

    zhang = zhang_bound(1, 2, 0.1).value
    checks.append(abs(zhang - ZHANG_EXAMPLE) <= 5e-6)
    checks.append(math.isclose(zhang, 0.6 + 3 * binary_entropy(0.1), rel_tol=1e-12))
    checks.append(zhang_bound(1, 2, 0.0).value == 0.0)

    params = BoundParams(d=1, epsilon=0.1, n=10_000, gamma=0.9, k=1, alphabet_size=2)
    eps, _ = inner_epsilon(params)
    composed = 8 * delta_bound(7, eps, 9999, 0.9)
    checks.append(math.isclose(deviation_bound(params).value, composed, rel_tol=1e-12))
    checks.append(tv_deviation_bound(params).value >= 0)

    # 规划: 反解结果代回去应当满足目标，且在单调区内是最小的
    planned = BoundParams(d=1, epsilon=24.0, n=2, gamma=0.5, k=1, alphabet_size=2)
    n_req = required_n(planned, 0.5)
    checks.append(deviation_bound(planned.with_n(n_req)).value <= 0.5)
    checks.append(n_req == bound_crossover_n(planned) or deviation_bound(planned.with_n(n_req - 1)).value > 0.5)

    violations = sum(not c for c in checks)
    return SuiteResult("bound-arithmetic", len(checks), violations, f"delta example {format_number(delta)}")


def _not_larger(a, b):
    """a <= b up to rounding"""
    return a <= b * (1 + 1e-12) or (math.isinf(a) and math.isinf(b))


def suite_bound_monotonicity(seed=0):
    """
    deviation_bound is nonincreasing in n (past the crossover) and in eps,
    nondecreasing in d, k, |Y| and gamma, over a grid.
    """
    ds, epsilons, ks, alphabets, gammas = (1, 2, 3), (0.5, 1.0, 2.0), (1, 2), (2, 3), (0.5, 0.9)
    violations = cases = 0

    def bound(d, eps, n, gamma, k, y):
        return deviation_bound(BoundParams(d=d, epsilon=eps, n=n, gamma=gamma, k=k, alphabet_size=y)).value

    for d in ds:
        for eps in epsilons:
            for k in ks:
                for y in alphabets:
                    for gamma in gammas:
                        base = BoundParams(d=d, epsilon=eps, n=k + 1, gamma=gamma, k=k, alphabet_size=y)
                        start = max(
                            bound_crossover_n(base),
                            bound_crossover_n(BoundParams(d, eps, k + 2, gamma, k + 1, y)),
                        )
                        for n in (start, 2 * start, 4 * start, 8 * start):
                            value = bound(d, eps, n, gamma, k, y)
                            comparisons = [
                                _not_larger(bound(d, eps, 2 * n, gamma, k, y), value),
                                _not_larger(bound(d, 2 * eps, n, gamma, k, y), value),
                                _not_larger(value, bound(d + 1, eps, n, gamma, k, y)),
                                _not_larger(value, bound(d, eps, n, gamma, k + 1, y)),
                                _not_larger(value, bound(d, eps, n, gamma, k, y + 1)),
                                _not_larger(value, bound(d, eps, n, min(0.99, gamma + 0.05), k, y)),
                            ]
                            cases += len(comparisons)
                            violations += sum(not c for c in comparisons)
    return SuiteResult("bound-monotonicity", cases, violations)


def suite_deviation_mc(seed=0, replicates=3, n=None, target=0.5):
    """
    Two-map family {identity, swap} on the symmetric chain (d = 1) with a
    large eps, at the sample size where deviation_bound drops below target.
    """
    spec = _symmetric_chain()
    family = [
        LookupTable(alphabet_size=2, table=np.array([0, 1])),
        LookupTable(alphabet_size=2, table=np.array([1, 0])),
    ]
    gamma = mixing_profile(spec).gamma
    params = BoundParams(d=1, epsilon=24.0, n=2, gamma=gamma, k=1, alphabet_size=2)
    params = params.with_n(n if n is not None else required_n(params, target))
    check = deviation_monte_carlo(spec, family, params, replicates, seed)
    violations = int(not check.passed)
    detail = (
        f"n={params.n}, bound {format_number(check.bound.value)}, "
        f"{check.exceedances}/{check.replicates} exceedances"
    )
    return SuiteResult("deviation-mc", replicates, violations, detail)


# ============== Registry ==============

SUITES = {
    "ideal-ci": suite_ideal_ci,
    "ci-optimality": suite_ci_optimality,
    "markov-collapse": suite_markov_collapse,
    "past-future": suite_past_future,
    "pair-identity": suite_pair_identity,
    "rate-gap": suite_rate_gap,
    "stationary": suite_stationary,
    "estimator-consistency": suite_estimator_consistency,
    "zhang": suite_zhang,
    "recovery": suite_recovery,
    "policy-invariance": suite_policy_invariance,
    "selection-invariance": suite_selection_invariance,
    "active-selection": suite_active_selection,
    "bound-arithmetic": suite_bound_arithmetic,
    "bound-monotonicity": suite_bound_monotonicity,
    "deviation-mc": suite_deviation_mc,
}


def run_suites(name, seed=0):
    """Run one suite by name, or every suite for "all"."""
    if name == "all":
        names = list(SUITES)
    elif name in SUITES:
        names = [name]
    else:
        raise ValidationError(MODULE, "run_suites", f"unknown suite {name!r}; choose from {['all'] + list(SUITES)}")
    results = []
    for suite in names:
        result = SUITES[suite](seed=seed)
        level = logger.info if result.passed else logger.error
        level(f"verify {suite}: {result.violations} violations in {result.cases} cases {result.detail}".rstrip())
        results.append(result)
    return results
