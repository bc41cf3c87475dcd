"""
Plug-in 估计量
h_0, h_k, I_k, I_inf (k_n schedule) 以及二元熵及其反函数

单位统一为 bits (log base 2)。I_k 由同一个 (k+1)-块经验分布计算，
保证非负。
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import entropy as _scipy_entropy

from config import SUPPORT_GUARD_FACTOR
from utils.common import SequenceTooShortError, ValidationError
from utils.core import apply_representation, collect_blocks
from utils.logger import get_logger

MODULE = "estimators"
logger = get_logger("tsinfo.estimators")

PROB_SUM_TOL = 1e-9


@dataclass(frozen=True)
class InfoEstimate:
    value: float
    k_used: int
    n_effective: int
    sparse_support: bool = False


# ============== Entropy ==============

def entropy_from_counts(counts):
    """
    Plug-in entropy (bits) of a count vector; zero cells contribute nothing.

    Cells are summed in sorted order so relabeling the alphabet gives
    bit-identical results.
    """
    counts = np.asarray(counts, dtype=np.float64).ravel()
    counts = np.sort(counts[counts > 0])
    if counts.size <= 1:
        return 0.0
    return max(0.0, float(_scipy_entropy(counts / counts.sum(), base=2)))


def entropy(dist):
    """-sum p log2 p of a probability vector, 0 log 0 := 0"""
    p = np.asarray(dist, dtype=np.float64).ravel()
    if p.size == 0:
        raise ValidationError(MODULE, "entropy", "empty probability vector")
    if np.any(p < 0):
        raise ValidationError(MODULE, "entropy", "negative probability entry")
    total = float(p.sum())
    if abs(total - 1.0) > PROB_SUM_TOL:
        raise ValidationError(MODULE, "entropy", f"probabilities sum to {total!r}, not 1")
    value = entropy_from_counts(p)
    return min(value, math.log2(p.size)) if p.size > 1 else 0.0


def binary_entropy(p):
    if not 0.0 <= p <= 1.0:
        raise ValidationError(MODULE, "binary_entropy", f"p={p!r} outside [0, 1]")
    if p == 0.0 or p == 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def binary_entropy_inverse(target):
    """
    The p in [0, 1/2] with binary_entropy(p) = target, by bisection.
    """
    if not 0.0 <= target <= 1.0:
        raise ValidationError(MODULE, "binary_entropy_inverse", f"target={target!r} outside [0, 1]")
    if target == 0.0:
        return 0.0
    if target == 1.0:
        return 0.5
    lo, hi = 0.0, 0.5
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if binary_entropy(mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-16:
            break
    return 0.5 * (lo + hi)


# ============== Block Information ==============

def mutual_information_from_block_probs(probs, alphabet_size):
    """
    I(last symbol; first k symbols) of a (k+1)-block law given as a dense
    vector over base-|Y| block codes (counts or probabilities).
    """
    joint = np.asarray(probs, dtype=np.float64).reshape(-1, alphabet_size)
    h_first = entropy_from_counts(joint.sum(axis=1))
    h_last = entropy_from_counts(joint.sum(axis=0))
    h_joint = entropy_from_counts(joint)
    return max(0.0, h_first + h_last - h_joint)


def conditional_entropy_from_block_probs(probs, alphabet_size):
    """H(last symbol | first k symbols) of a (k+1)-block law"""
    joint = np.asarray(probs, dtype=np.float64).reshape(-1, alphabet_size)
    return max(0.0, entropy_from_counts(joint) - entropy_from_counts(joint.sum(axis=1)))


def block_total_variation(exact_probs, dist):
    """alpha = sum |p - p_hat| over all (k+1)-blocks, range [0, 2]"""
    exact_probs = np.asarray(exact_probs, dtype=np.float64)
    if exact_probs.shape != dist.counts.shape:
        raise ValidationError(MODULE, "block_total_variation", "exact and empirical supports differ")
    return float(np.abs(exact_probs - dist.probabilities()).sum())


def _check_memory(k, operation):
    if k < 1:
        raise ValidationError(MODULE, operation, f"memory k must be >= 1, got {k}")


def ik_hat_symbols(symbols, k, alphabet_size):
    _check_memory(k, "ik_hat")
    if len(symbols) <= k:
        raise SequenceTooShortError(MODULE, "ik_hat", f"series length {len(symbols)} must exceed k={k}")
    dist = collect_blocks(symbols, k, alphabet_size)
    sparse = alphabet_size ** (k + 1) > SUPPORT_GUARD_FACTOR * dist.n_blocks
    if sparse:
        logger.warning(
            f"ik_hat: |Y|^(k+1)={alphabet_size ** (k + 1)} blocks vs {dist.n_blocks} samples, "
            "plug-in estimate is biased"
        )
    value = mutual_information_from_block_probs(dist.counts, alphabet_size)
    return InfoEstimate(value=value, k_used=k, n_effective=dist.n_blocks, sparse_support=sparse)


def hk_hat_symbols(symbols, k, alphabet_size):
    _check_memory(k, "hk_hat")
    if len(symbols) <= k:
        raise SequenceTooShortError(MODULE, "hk_hat", f"series length {len(symbols)} must exceed k={k}")
    dist = collect_blocks(symbols, k, alphabet_size)
    return conditional_entropy_from_block_probs(dist.counts, alphabet_size)


def h0_hat(f, series):
    symbols = apply_representation(f, series)
    return entropy_from_counts(np.bincount(symbols, minlength=f.alphabet_size))


def ik_hat(f, series, k):
    """Plug-in I_k(f) = H(last) + H(first k) - H(joint) on (k+1)-blocks"""
    return ik_hat_symbols(apply_representation(f, series), k, f.alphabet_size)


def hk_hat(f, series, k):
    """Plug-in h_k(f) = H(joint (k+1)-block) - H(first k)"""
    return hk_hat_symbols(apply_representation(f, series), k, f.alphabet_size)


# ============== I_inf Schedule ==============

def schedule_k(n, alphabet_size):
    """
    k_n = max(1, min(floor(log2 log2 (n+2)), largest k with |Y|^(k+1) <= n/10))
    """
    if n < 2:
        raise ValidationError(MODULE, "schedule_k", f"n must be >= 2, got {n}")
    loglog = math.floor(math.log2(math.log2(n + 2)))
    if alphabet_size <= 1:
        return max(1, loglog)
    guard = -1
    while alphabet_size ** (guard + 2) * SUPPORT_GUARD_FACTOR <= n:
        guard += 1
    return max(1, min(loglog, guard))


def iinf_hat(f, series):
    k = schedule_k(len(series), f.alphabet_size)
    if len(series) <= k:
        raise SequenceTooShortError(MODULE, "iinf_hat", f"series length {len(series)} must exceed k_n={k}")
    return ik_hat(f, series, k)
