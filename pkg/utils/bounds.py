"""
集中不等式与样本量规划
q_n 界、几何混合下的 Delta 界、I_k 的一致偏差界 (7kd VC 放大)、
信息量 / 全变差连续性界、反解所需样本量

概率界里的指数项用自然指数；信息量 (epsilon, log|Y|) 一律按 bits。
所有 Delta 计算在 log 域完成，大 n 不会溢出。
"""

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from config import REQUIRED_N_CAP
from utils.common import UnattainableError, ValidationError
from utils.estimators import binary_entropy, binary_entropy_inverse, ik_hat
from utils.logger import get_logger
from utils.oracle import exact_ik
from utils.processes import sample_chain

MODULE = "bounds"
logger = get_logger("tsinfo.bounds")


# ============== Types ==============

@dataclass(frozen=True)
class BoundParams:
    d: int
    epsilon: float
    n: int
    gamma: float
    k: int = 1
    alphabet_size: int = 2

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValidationError(MODULE, "BoundParams", f"VC dimension d must be a positive integer, got {self.d!r}")
        if not self.epsilon > 0:
            raise ValidationError(MODULE, "BoundParams", f"epsilon must be > 0, got {self.epsilon!r}")
        if int(self.n) != self.n or self.n < 1:
            raise ValidationError(MODULE, "BoundParams", f"n must be a positive integer, got {self.n!r}")
        if not 0.0 < self.gamma < 1.0:
            raise ValidationError(MODULE, "BoundParams", f"gamma must lie in (0, 1), got {self.gamma!r}")
        if int(self.k) != self.k or self.k < 1:
            raise ValidationError(MODULE, "BoundParams", f"k must be a positive integer, got {self.k!r}")
        if int(self.alphabet_size) != self.alphabet_size or self.alphabet_size < 2:
            raise ValidationError(MODULE, "BoundParams", f"alphabet_size must be >= 2, got {self.alphabet_size!r}")

    def with_n(self, n):
        return BoundParams(self.d, self.epsilon, int(n), self.gamma, self.k, self.alphabet_size)

    @property
    def block_support(self):
        return self.alphabet_size ** (self.k + 1)


@dataclass(frozen=True, eq=False)
class BetaSchedule:
    """beta(t) for t = 1..t_max; past t_max the last value is used."""

    values: Tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        if not values:
            raise ValidationError(MODULE, "BetaSchedule", "at least one mixing coefficient is required")
        if any(v < 0.0 or v > 1.0 for v in values):
            raise ValidationError(MODULE, "BetaSchedule", "mixing coefficients must lie in [0, 1]")
        if any(b > a + 1e-15 for a, b in zip(values, values[1:])):
            raise ValidationError(MODULE, "BetaSchedule", "mixing coefficients must be nonincreasing")
        object.__setattr__(self, "values", values)

    @property
    def t_max(self):
        return len(self.values)

    def beta(self, t):
        return self.values[min(t, self.t_max) - 1]


@dataclass(frozen=True)
class BoundValue:
    value: float
    vacuous: bool
    saturated: bool = False


def geometric_beta_schedule(gamma, t_max):
    if not 0.0 <= gamma < 1.0:
        raise ValidationError(MODULE, "geometric_beta_schedule", f"gamma must lie in [0, 1), got {gamma!r}")
    if t_max < 1:
        raise ValidationError(MODULE, "geometric_beta_schedule", "t_max must be >= 1")
    return BetaSchedule(values=tuple(gamma ** t for t in range(1, t_max + 1)))


# ============== Log-domain Helpers ==============

def _exp(log_value):
    if log_value > 709.0:
        return math.inf
    return math.exp(log_value)


def _log(value):
    return -math.inf if value <= 0 else math.log(value)


# ============== q_n / Delta ==============

def q_bound(beta, d, epsilon, n, t_n):
    """
    n * beta(t_n) + 8 * t_n^(d+1) * exp(-l_n * eps^2 / 8), l_n = n / t_n
    """
    if not 1 <= t_n <= n:
        raise ValidationError(MODULE, "q_bound", f"t_n={t_n} outside 1..n={n}")
    if not epsilon > 0:
        raise ValidationError(MODULE, "q_bound", f"epsilon must be > 0, got {epsilon!r}")
    l_n = n / t_n
    mixing = n * beta.beta(t_n)
    tail = _exp(math.log(8.0) + (d + 1) * math.log(t_n) - l_n * epsilon ** 2 / 8.0)
    return mixing + tail


def delta_bound(d, epsilon, n, gamma):
    """
    n * gamma^sqrt(n) + 8 * n^((d+1)/2) * exp(-sqrt(n) * eps^2 / 8)
    """
    if n < 1:
        raise ValidationError(MODULE, "delta_bound", f"n must be >= 1, got {n}")
    if not 0.0 <= gamma < 1.0:
        raise ValidationError(MODULE, "delta_bound", f"gamma must lie in [0, 1), got {gamma!r}")
    if not epsilon > 0:
        raise ValidationError(MODULE, "delta_bound", f"epsilon must be > 0, got {epsilon!r}")
    root = math.sqrt(n)
    log_n = math.log(n)
    mixing = _exp(log_n + root * _log(gamma))
    tail = _exp(math.log(8.0) + 0.5 * (d + 1) * log_n - root * epsilon ** 2 / 8.0)
    return mixing + tail


# ============== Deviation of I_k ==============

def inner_epsilon(params):
    """
    (eps', saturated) where eps' = min(eps / (6 (k+1) |Y|^(k+1) log2|Y|), h^-1(eps / (6 |Y|^(k+1))))
    and saturated marks an h^-1 argument clipped at 1.
    """
    support = params.block_support
    linear = params.epsilon / (6.0 * (params.k + 1) * support * math.log2(params.alphabet_size))
    entropy_arg = params.epsilon / (6.0 * support)
    saturated = entropy_arg > 1.0
    return min(linear, binary_entropy_inverse(min(1.0, entropy_arg))), saturated


def deviation_bound(params):
    """
    P(sup_g |I_k_hat(g) - I_k(g)| > eps)
        <= 2 |Y|^(k+1) * Delta(7kd, eps', n - k, gamma)
    """
    if params.n <= params.k:
        raise ValidationError(MODULE, "deviation_bound", f"n={params.n} must exceed k={params.k}")
    eps, saturated = inner_epsilon(params)
    value = 2.0 * params.block_support * delta_bound(7 * params.k * params.d, eps, params.n - params.k, params.gamma)
    return BoundValue(value=value, vacuous=value > 1.0, saturated=saturated)


def tv_deviation_bound(params):
    """
    P(sum of block deviations > eps) <= |Y|^(k+1) * Delta(7kd, eps / |Y|^(k+1), n - k, gamma)
    """
    if params.n <= params.k:
        raise ValidationError(MODULE, "tv_deviation_bound", f"n={params.n} must exceed k={params.k}")
    support = params.block_support
    value = support * delta_bound(7 * params.k * params.d, params.epsilon / support, params.n - params.k, params.gamma)
    return BoundValue(value=value, vacuous=value > 1.0)


def bound_crossover_n(params):
    """
    Smallest n past which both Delta terms of deviation_bound decrease in n.

    n gamma^sqrt(n) decreases once sqrt(n) > 2 / (-ln gamma);
    n^((d'+1)/2) exp(-sqrt(n) eps'^2 / 8) once sqrt(n) > 8 (d'+1) / eps'^2.
    """
    eps, _ = inner_epsilon(params)
    d_blown = 7 * params.k * params.d
    mixing_root = 2.0 / -math.log(params.gamma)
    tail_root = 8.0 * (d_blown + 1) / eps ** 2
    return int(math.ceil(max(mixing_root, tail_root) ** 2)) + params.k


def required_n(params, target, cap=REQUIRED_N_CAP):
    """
    Smallest n >= bound_crossover_n(params) with deviation_bound <= target.

    params.n is ignored. Exponential search then bisection; past the
    crossover the bound is monotone in n so the result is minimal there.
    """
    if not 0.0 < target < 1.0:
        raise ValidationError(MODULE, "required_n", f"target must lie in (0, 1), got {target!r}")

    def ok(n):
        return deviation_bound(params.with_n(n)).value <= target

    lo = max(bound_crossover_n(params), params.k + 1)
    if lo > cap:
        raise UnattainableError(MODULE, "required_n", f"monotone regime starts at n={lo}, beyond cap {cap}")
    if ok(lo):
        return lo

    hi = lo
    while not ok(hi):
        lo = hi
        if hi >= cap:
            raise UnattainableError(
                MODULE, "required_n",
                f"no n <= {cap} brings the bound to {target}",
            )
        hi = min(2 * hi, cap)

    # invariant: not ok(lo), ok(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


# ============== Information / Total Variation ==============

def zhang_bound(k, alphabet_size, alpha):
    """
    |I_k(p) - I_k(p_hat)| <= 3 (k+1) alpha log2|Y| + 3 h(min(alpha, 1/2))
    for alpha = sum |p - p_hat| <= 1; beyond that the trivial
    2 (k+1) log2|Y| is returned, flagged saturated.
    """
    if alpha < 0:
        raise ValidationError(MODULE, "zhang_bound", f"alpha must be >= 0, got {alpha!r}")
    if alphabet_size < 1:
        raise ValidationError(MODULE, "zhang_bound", "alphabet_size must be >= 1")
    log_y = math.log2(alphabet_size) if alphabet_size > 1 else 0.0
    if alpha > 1.0:
        logger.warning(f"zhang_bound: alpha={alpha:.4g} > 1, returning the trivial cap")
        return BoundValue(value=2.0 * (k + 1) * log_y, vacuous=True, saturated=True)
    value = 3.0 * (k + 1) * alpha * log_y + 3.0 * binary_entropy(min(alpha, 0.5))
    return BoundValue(value=value, vacuous=False)


# ============== Monte-Carlo Check ==============

@dataclass(frozen=True)
class MonteCarloCheck:
    bound: BoundValue
    replicates: int
    exceedances: int

    @property
    def frequency(self):
        return self.exceedances / self.replicates

    @property
    def standard_error(self):
        p = self.frequency
        return math.sqrt(p * (1.0 - p) / self.replicates)

    @property
    def passed(self):
        return self.frequency <= self.bound.value + 3.0 * self.standard_error


def deviation_monte_carlo(spec, family, params, replicates, seed):
    """
    Frequency of sup_g |I_k_hat(g) - I_k(g)| > eps over independent
    trajectories of length params.n, against deviation_bound(params).
    """
    if replicates < 1:
        raise ValidationError(MODULE, "deviation_monte_carlo", "replicates must be >= 1")
    exact = np.array([exact_ik(spec, g, params.k) for g in family])
    exceed = 0
    for r in range(replicates):
        series = sample_chain(spec, params.n, seed, stream=r)
        estimates = np.array([ik_hat(g, series, params.k).value for g in family])
        if np.abs(estimates - exact).max() > params.epsilon:
            exceed += 1
    check = MonteCarloCheck(bound=deviation_bound(params), replicates=replicates, exceedances=exceed)
    logger.info(
        f"deviation_monte_carlo: {exceed}/{replicates} exceedances, bound {check.bound.value:.6g}"
    )
    return check
