"""
有限状态精确计算 (oracle)
平稳分布、精确块分布、精确 I_k / h_k、熵率上下界、条件独立检查

所有结果都由转移矩阵精确推出，不做任何模拟。
块分布用前向递推 (block code, 当前状态) 计算，
复杂度 |Y|^(k+1) * |X|^2，而不是逐条路径枚举。
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from config import DEFAULT_CI_TOL, ENUMERATION_GUARD, POWER_ITERATION_THRESHOLD
from utils.common import (
    GuardError, ReducibleChainError, ValidationError, load_json,
)
from utils.core import LookupTable, pair_representation
from utils.estimators import (
    conditional_entropy_from_block_probs, entropy_from_counts,
    mutual_information_from_block_probs,
)
from utils.logger import get_logger

MODULE = "oracle"
logger = get_logger("tsinfo.oracle")

ROW_SUM_TOL = 1e-12
STATIONARY_TOL = 1e-10


# ============== Markov Chain Spec ==============

@dataclass(frozen=True, eq=False)
class MarkovChainSpec:
    transition: np.ndarray
    stationary: Optional[np.ndarray] = None

    def __post_init__(self):
        P = np.array(self.transition, dtype=np.float64)
        if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] == 0:
            raise ValidationError(MODULE, "MarkovChainSpec", f"transition must be a non-empty square matrix, got shape {P.shape}")
        if np.any(P < 0):
            raise ValidationError(MODULE, "MarkovChainSpec", "negative transition probability")
        worst = float(np.abs(P.sum(axis=1) - 1.0).max())
        if worst > ROW_SUM_TOL:
            raise ValidationError(MODULE, "MarkovChainSpec", f"rows must sum to 1 (worst deviation {worst:.3g})")
        P.flags.writeable = False
        object.__setattr__(self, "transition", P)

        if self.stationary is not None:
            pi = np.array(self.stationary, dtype=np.float64)
            if pi.shape != (P.shape[0],):
                raise ValidationError(MODULE, "MarkovChainSpec", "cached stationary vector has the wrong length")
            if float(np.abs(pi @ P - pi).sum()) > STATIONARY_TOL:
                raise ValidationError(MODULE, "MarkovChainSpec", "cached stationary vector does not satisfy pi P = pi")
            pi.flags.writeable = False
            object.__setattr__(self, "stationary", pi)

    @property
    def n_states(self):
        return self.transition.shape[0]


def normalize_rows(matrix):
    """Rescale nonnegative rows to sum to 1 exactly (up to rounding)."""
    matrix = np.asarray(matrix, dtype=np.float64)
    return matrix / matrix.sum(axis=-1, keepdims=True)


def chain_to_json(spec):
    data = {
        "n_states": spec.n_states,
        "transition": spec.transition.ravel().tolist(),
    }
    if spec.stationary is not None:
        data["stationary"] = spec.stationary.tolist()
    return data


def chain_from_json(data):
    try:
        n = int(data["n_states"])
        P = np.array(data["transition"], dtype=np.float64).reshape(n, n)
    except (KeyError, ValueError) as e:
        raise ValidationError(MODULE, "chain_from_json", f"malformed chain spec: {e}") from e
    return MarkovChainSpec(transition=P, stationary=data.get("stationary"))


def load_chain(path):
    return chain_from_json(load_json(path, MODULE, "load_chain"))


# ============== Communicating Classes ==============

def closed_classes(transition):
    """Closed communicating classes of the positive-transition digraph."""
    P = np.asarray(transition)
    n_comp, labels = connected_components(csr_matrix(P > 0), directed=True, connection="strong")
    closed = []
    for c in range(n_comp):
        members = np.flatnonzero(labels == c)
        outside = np.ones(P.shape[0], dtype=bool)
        outside[members] = False
        if not np.any(P[np.ix_(members, outside)] > 0):
            closed.append(members.tolist())
    return sorted(closed)


def is_irreducible(transition):
    P = np.asarray(transition)
    n_comp, _ = connected_components(csr_matrix(P > 0), directed=True, connection="strong")
    return n_comp == 1


def second_largest_eigenvalue_modulus(transition):
    P = np.asarray(transition, dtype=np.float64)
    if P.shape[0] == 1:
        return 0.0
    moduli = np.sort(np.abs(linalg.eigvals(P)))[::-1]
    return float(moduli[1])


# ============== Stationary Distribution ==============

def _stationary_direct(P):
    n = P.shape[0]
    A = P.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    return linalg.solve(A, b)


def _stationary_power(P, tol=1e-13, max_iter=1_000_000):
    # lazy chain: same stationary law, no periodic oscillation
    lazy = 0.5 * (P + np.eye(P.shape[0]))
    pi = np.full(P.shape[0], 1.0 / P.shape[0])
    for _ in range(max_iter):
        nxt = pi @ lazy
        if np.abs(nxt - pi).sum() < tol:
            return nxt
        pi = nxt
    return pi


def stationary_distribution(spec):
    """
    Unique pi with pi P = pi, sum pi = 1.

    Direct linear solve (one balance equation replaced by the normalization);
    power iteration above POWER_ITERATION_THRESHOLD states.
    """
    if spec.stationary is not None:
        return spec.stationary
    P = spec.transition
    classes = closed_classes(P)
    if len(classes) != 1:
        raise ReducibleChainError(MODULE, "stationary_distribution", classes)

    if spec.n_states > POWER_ITERATION_THRESHOLD:
        pi = _stationary_power(P)
    else:
        pi = _stationary_direct(P)
    pi = np.clip(pi, 0.0, None)
    pi = pi / pi.sum()

    residual = float(np.abs(pi @ P - pi).sum())
    if residual > STATIONARY_TOL:
        logger.warning(f"stationary_distribution: residual {residual:.3g} above {STATIONARY_TOL}")
    return pi


# ============== Exact Block Laws ==============

def _check_table(spec, f, operation):
    if not isinstance(f, LookupTable):
        raise ValidationError(MODULE, operation, "exact computations need a lookup-table representation")
    if f.n_states != spec.n_states:
        raise ValidationError(
            MODULE, operation,
            f"representation domain {f.n_states} != chain size {spec.n_states}",
        )


def _check_guard(n_states, k, operation):
    if k < 0:
        raise ValidationError(MODULE, operation, f"memory k must be >= 0, got {k}")
    if n_states ** (k + 1) > ENUMERATION_GUARD:
        raise GuardError(
            MODULE, operation,
            f"|X|^(k+1) = {n_states}^{k + 1} exceeds the enumeration guard {ENUMERATION_GUARD}",
        )


def _block_state_law(spec, f, k, keep_first=False):
    """
    Joint law of (block code of Y_0..Y_k, X_k), shape (|Y|^(k+1), |X|);
    with keep_first the leading axis is X_0, shape (|X|, |Y|^(k+1), |X|).
    """
    P = spec.transition
    pi = stationary_distribution(spec)
    Y = f.alphabet_size
    table = f.table
    states = np.arange(spec.n_states)

    if keep_first:
        law = np.zeros((spec.n_states, Y, spec.n_states))
        law[states, table, states] = pi
    else:
        law = np.zeros((Y, spec.n_states))
        law[table, states] = pi

    for _ in range(k):
        moved = law @ P
        n_codes = law.shape[-2]
        rows = np.arange(n_codes)[:, None] * Y + table[None, :]
        cols = np.broadcast_to(states, rows.shape)
        nxt = np.zeros(law.shape[:-2] + (n_codes * Y, spec.n_states))
        nxt[..., rows, cols] = moved
        law = nxt
    return law


def exact_block_distribution(spec, f, k):
    """Exact stationary law of (Y_0, ..., Y_k) as a dense vector over block codes."""
    _check_table(spec, f, "exact_block_distribution")
    _check_guard(spec.n_states, k, "exact_block_distribution")
    probs = _block_state_law(spec, f, k).sum(axis=-1)
    return probs


def exact_h0(spec, f):
    return entropy_from_counts(exact_block_distribution(spec, f, 0))


def exact_ik(spec, f, k):
    """I(Y_k; Y_0..Y_{k-1}) under the stationary law"""
    if k < 1:
        raise ValidationError(MODULE, "exact_ik", f"memory k must be >= 1, got {k}")
    return mutual_information_from_block_probs(exact_block_distribution(spec, f, k), f.alphabet_size)


def exact_hk(spec, f, k):
    """h(Y_k | Y_0..Y_{k-1}) under the stationary law"""
    if k < 1:
        raise ValidationError(MODULE, "exact_hk", f"memory k must be >= 1, got {k}")
    return conditional_entropy_from_block_probs(exact_block_distribution(spec, f, k), f.alphabet_size)


def induced_label_transition(spec, f):
    """Exact P(Y_1 = y' | Y_0 = y); rows of labels with zero mass are left at 0."""
    joint = exact_block_distribution(spec, f, 1).reshape(f.alphabet_size, f.alphabet_size)
    mass = joint.sum(axis=1, keepdims=True)
    out = np.zeros_like(joint)
    np.divide(joint, mass, out=out, where=mass > 0)
    return out


# ============== Entropy-Rate Sandwich ==============

@dataclass(frozen=True)
class EntropyRateSandwich:
    k: int
    lower: float
    upper: float

    @property
    def gap(self):
        return self.upper - self.lower


def entropy_rate_sandwich(spec, f, k):
    """
    h(Y_k | Y_0..Y_{k-1}, X_0) <= h_inf(f) <= h(Y_k | Y_0..Y_{k-1})
    """
    _check_table(spec, f, "entropy_rate_sandwich")
    if k < 1:
        raise ValidationError(MODULE, "entropy_rate_sandwich", f"memory k must be >= 1, got {k}")
    _check_guard(spec.n_states, k, "entropy_rate_sandwich")

    Y = f.alphabet_size
    law = _block_state_law(spec, f, k, keep_first=True).sum(axis=-1)  # (X_0, codes)
    upper = conditional_entropy_from_block_probs(law.sum(axis=0), Y)
    with_first = law.reshape(spec.n_states, -1, Y)
    lower = max(0.0, entropy_from_counts(with_first) - entropy_from_counts(with_first.sum(axis=2)))
    # 数值误差下 lower 可能比 upper 大 1e-16 量级
    lower = min(lower, upper)
    return EntropyRateSandwich(k=k, lower=lower, upper=upper)


def family_rate_gap(spec, family, k):
    """max over the family of the sandwich gap at memory k, a bound on sup |h_inf - h_k|"""
    return max(entropy_rate_sandwich(spec, g, k).gap for g in family)


# ============== Conditional Independence ==============

@dataclass(frozen=True)
class CICheck:
    passed: bool
    max_violation: float


def context_violation(weights, table, alphabet_size, reference):
    """
    weights[r, x0]: joint probability of context r and X_0 = x0.
    reference[r, x0] (or [x0]): the law X_0 should have given its label
    (and whatever else the reference conditions on).

    Returns max |P(X_0 = x0 | label, context r) - reference| over events
    with positive probability.
    """
    weights = np.asarray(weights, dtype=np.float64)
    onehot = np.zeros((len(table), alphabet_size))
    onehot[np.arange(len(table)), table] = 1.0
    label_mass = weights @ onehot                      # (R, Y)
    denom = label_mass[:, table]                       # (R, X)
    positive = denom > 0
    cond = np.zeros_like(weights)
    np.divide(weights, denom, out=cond, where=positive)
    reference = np.broadcast_to(reference, weights.shape)
    if not np.any(positive):
        return 0.0
    return float(np.abs(cond - reference)[positive].max())


def label_conditional(weights, table, alphabet_size):
    """P(X = x | f(X) = f(x)) for a vector (or rows) of state weights."""
    weights = np.asarray(weights, dtype=np.float64)
    onehot = np.zeros((len(table), alphabet_size))
    onehot[np.arange(len(table)), table] = 1.0
    mass = (weights @ onehot)[..., table]
    out = np.zeros_like(weights)
    np.divide(weights, mass, out=out, where=mass > 0)
    return out


def window_law(spec, window):
    """
    Stationary law of X_{-w}, ..., X_w with X_0 moved to the last axis,
    reshaped to (contexts, |X|).
    """
    n = spec.n_states
    if n ** (2 * window + 1) > ENUMERATION_GUARD:
        raise GuardError(
            MODULE, "ci_check_markov",
            f"|X|^(2w+1) = {n}^{2 * window + 1} exceeds the enumeration guard {ENUMERATION_GUARD}",
        )
    P = spec.transition
    law = stationary_distribution(spec)
    for _ in range(2 * window):
        law = law[..., None] * P
    law = np.moveaxis(law, window, -1)
    return law.reshape(-1, n)


def ci_check_markov(spec, f, tol=DEFAULT_CI_TOL, window=1):
    """
    P(X_0 | f(X_0), X_{-w..-1}, X_{1..w}) == P(X_0 | f(X_0)) on every
    positive-probability event; w = 1 is sufficient for Markov chains.
    """
    _check_table(spec, f, "ci_check_markov")
    if window < 1:
        raise ValidationError(MODULE, "ci_check_markov", f"window must be >= 1, got {window}")
    weights = window_law(spec, window)
    reference = label_conditional(stationary_distribution(spec), f.table, f.alphabet_size)
    violation = context_violation(weights, f.table, f.alphabet_size, reference)
    return CICheck(passed=violation <= tol, max_violation=violation)


@dataclass(frozen=True)
class ChainRuleCheck:
    holds: bool
    conditioned_on_both: float
    conditioned_on_f: float


def chain_rule_identity_check(spec, f, g, tol=1e-9):
    """
    h(f(X_0) | f(X_{-1}), g(X_{-1}), f(X_1), g(X_1)) against
    h(f(X_0) | f(X_{-1}), f(X_1)); equal whenever f passes ci_check_markov.
    """
    _check_table(spec, f, "chain_rule_identity_check")
    _check_table(spec, g, "chain_rule_identity_check")
    Yf, Yg = f.alphabet_size, g.alphabet_size
    triple = window_law(spec, 1).reshape(spec.n_states, spec.n_states, spec.n_states)  # (x-1, x1, x0)

    xm, x1, x0 = np.meshgrid(*(np.arange(spec.n_states),) * 3, indexing="ij")
    joint = np.zeros((Yf, Yg, Yf, Yg, Yf))   # (y-1, z-1, y1, z1, y0)
    np.add.at(
        joint,
        (f.table[xm], g.table[xm], f.table[x1], g.table[x1], f.table[x0]),
        triple,
    )
    both = entropy_from_counts(joint) - entropy_from_counts(joint.sum(axis=4))
    only_f = joint.sum(axis=(1, 3))          # (y-1, y1, y0)
    rhs = entropy_from_counts(only_f) - entropy_from_counts(only_f.sum(axis=2))
    both, rhs = max(0.0, both), max(0.0, rhs)
    return ChainRuleCheck(holds=abs(both - rhs) <= tol, conditioned_on_both=both, conditioned_on_f=rhs)


# ============== Time Reversal / Strictness ==============

def reversed_chain(spec):
    """R(x, x') = pi(x') P(x', x) / pi(x); needs a full-support stationary law."""
    pi = stationary_distribution(spec)
    if np.any(pi <= 0):
        raise ValidationError(MODULE, "reversed_chain", "stationary law has zero-mass states")
    R = normalize_rows(spec.transition.T * pi[None, :] / pi[:, None])
    return MarkovChainSpec(transition=R, stationary=pi)


def exact_past_information(spec, f, k):
    """
    I(Y_0; Y_{-1}, ..., Y_{-k}) read off the time-reversed chain, whose
    forward blocks are (Y_0, Y_{-1}, ..., Y_{-k}).
    """
    if k < 1:
        raise ValidationError(MODULE, "exact_past_information", f"memory k must be >= 1, got {k}")
    probs = exact_block_distribution(reversed_chain(spec), f, k)
    Y = f.alphabet_size
    joint = probs.reshape(Y, -1)
    return max(0.0, entropy_from_counts(joint.sum(axis=1)) + entropy_from_counts(joint.sum(axis=0)) - entropy_from_counts(joint))


def strictness_order(spec, f, g, k_max=6, tol=1e-9):
    """Smallest k <= k_max with exact I_k(f) > exact I_k(g) + tol, or None."""
    for k in range(1, k_max + 1):
        if exact_ik(spec, f, k) > exact_ik(spec, g, k) + tol:
            return k
    return None


def pair_information_identity(spec, f, g, k=1, tol=1e-9):
    """I_k of x -> (f(x), g(x)) against I_k(f); equal when f is conditionally independent."""
    i_pair = exact_ik(spec, pair_representation(f, g), k)
    i_f = exact_ik(spec, f, k)
    return abs(i_pair - i_f) <= tol, i_pair, i_f
