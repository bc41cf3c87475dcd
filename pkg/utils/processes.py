"""
过程生成与采样
理想 (条件独立) 链的构造、随机链 / i.i.d. / 循环链、带 burn-in 的定种子采样、
穷举 lookup-table 函数族
"""

import itertools
from bisect import bisect_right
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from config import FAMILY_GUARD
from utils.common import GuardError, ReducibleChainError, ValidationError, make_rng
from utils.core import LookupTable, ObservationSeries
from utils.logger import get_logger
from utils.oracle import (
    MarkovChainSpec, closed_classes, normalize_rows,
    second_largest_eigenvalue_modulus, stationary_distribution,
)

MODULE = "processes"
logger = get_logger("tsinfo.processes")

MIN_GAMMA = 1e-12
MAX_GAMMA = 1.0 - 1e-12


# ============== Types ==============

@dataclass(frozen=True, eq=False)
class IdealChainRecipe:
    """
    Label transition T over Y, the preimage size of every label and the
    emission law q(.|y) over each preimage.
    """

    label_transition: np.ndarray
    preimage_sizes: Tuple[int, ...]
    emission_weights: Tuple[np.ndarray, ...]

    def __post_init__(self):
        T = np.array(self.label_transition, dtype=np.float64)
        if T.ndim != 2 or T.shape[0] != T.shape[1] or T.shape[0] == 0:
            raise ValidationError(MODULE, "IdealChainRecipe", f"label transition must be square, got {T.shape}")
        if np.any(T < 0) or np.abs(T.sum(axis=1) - 1.0).max() > 1e-12:
            raise ValidationError(MODULE, "IdealChainRecipe", "label transition must be row-stochastic")
        sizes = tuple(int(s) for s in self.preimage_sizes)
        if len(sizes) != T.shape[0]:
            raise ValidationError(MODULE, "IdealChainRecipe", f"{len(sizes)} preimage sizes for {T.shape[0]} labels")
        if min(sizes) < 1:
            raise ValidationError(MODULE, "IdealChainRecipe", "every label needs at least one state")
        if len(self.emission_weights) != len(sizes):
            raise ValidationError(MODULE, "IdealChainRecipe", "one emission vector per label is required")
        emissions = []
        for y, (size, q) in enumerate(zip(sizes, self.emission_weights)):
            q = np.array(q, dtype=np.float64)
            if q.shape != (size,):
                raise ValidationError(MODULE, "IdealChainRecipe", f"emission {y} has {q.size} entries, preimage has {size}")
            if np.any(q <= 0) or abs(q.sum() - 1.0) > 1e-12:
                raise ValidationError(MODULE, "IdealChainRecipe", f"emission {y} must be a strictly positive probability vector")
            q.flags.writeable = False
            emissions.append(q)
        T.flags.writeable = False
        object.__setattr__(self, "label_transition", T)
        object.__setattr__(self, "preimage_sizes", sizes)
        object.__setattr__(self, "emission_weights", tuple(emissions))

    @property
    def n_labels(self):
        return len(self.preimage_sizes)

    @property
    def n_states(self):
        return sum(self.preimage_sizes)

    def label_table(self):
        """States are numbered label by label: preimage of 0 first, then 1, ..."""
        return np.repeat(np.arange(self.n_labels), self.preimage_sizes)

    def state_emissions(self):
        return np.concatenate(self.emission_weights)


@dataclass(frozen=True)
class MixingProfile:
    """Geometric mixing rate; certified is False when the chain is periodic."""

    gamma: float
    certified: bool = True

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValidationError(MODULE, "MixingProfile", f"gamma={self.gamma!r} outside (0, 1)")


def mixing_profile(spec):
    slem = second_largest_eigenvalue_modulus(spec.transition)
    certified = slem < MAX_GAMMA
    if not certified:
        logger.warning(f"mixing_profile: second eigenvalue modulus {slem:.6g}, chain is not geometrically mixing")
    gamma = float(np.clip(slem, MIN_GAMMA, MAX_GAMMA))
    return MixingProfile(gamma=gamma, certified=certified)


# ============== Ideal Construction ==============

def build_ideal_chain(recipe):
    """
    P(x' | x) = T(f(x), f(x')) * q(x' | f(x'))

    Returns (spec, f, mixing). The stationary law pi_T(f(x)) q(x | f(x))
    is cached on the spec.
    """
    T = recipe.label_transition
    classes = closed_classes(T)
    if len(classes) != 1:
        raise ReducibleChainError(MODULE, "build_ideal_chain", classes)

    table = recipe.label_table()
    q = recipe.state_emissions()
    P = normalize_rows(T[np.ix_(table, table)] * q[None, :])

    label_pi = stationary_distribution(MarkovChainSpec(transition=T))
    pi = label_pi[table] * q
    pi = pi / pi.sum()

    spec = MarkovChainSpec(transition=P, stationary=pi)
    f = LookupTable(alphabet_size=recipe.n_labels, table=table)
    return spec, f, mixing_profile(spec)


def recipe_to_json(recipe):
    return {
        "label_transition": recipe.label_transition.tolist(),
        "preimage_sizes": list(recipe.preimage_sizes),
        "emission_weights": [q.tolist() for q in recipe.emission_weights],
    }


def recipe_from_json(data):
    try:
        return IdealChainRecipe(
            label_transition=np.array(data["label_transition"], dtype=np.float64),
            preimage_sizes=tuple(data["preimage_sizes"]),
            emission_weights=tuple(np.array(q, dtype=np.float64) for q in data["emission_weights"]),
        )
    except KeyError as e:
        raise ValidationError(MODULE, "recipe_from_json", f"missing field {e}") from e


def uniform_recipe(label_transition, preimage_sizes):
    sizes = tuple(int(s) for s in preimage_sizes)
    return IdealChainRecipe(
        label_transition=np.asarray(label_transition, dtype=np.float64),
        preimage_sizes=sizes,
        emission_weights=tuple(np.full(s, 1.0 / s) for s in sizes),
    )


# ============== Random Generators ==============

def spread_label_transition(rng, n, min_row_distance=0.1, max_tries=1000):
    """
    Row-stochastic n x n matrix, all entries positive, rows pairwise at
    least min_row_distance apart in total variation.
    """
    for _ in range(max_tries):
        base = rng.dirichlet(np.ones(n), size=n)
        spike = np.eye(n)[rng.permutation(n)]
        T = normalize_rows(0.5 * base + 0.5 * spike)
        if n == 1:
            return T
        dist = np.abs(T[:, None, :] - T[None, :, :]).sum(axis=2)
        np.fill_diagonal(dist, np.inf)
        if dist.min() >= min_row_distance:
            return T
    raise GuardError(MODULE, "random_ideal_recipe", "could not draw a well separated label transition")


def random_ideal_recipe(rng, n_labels, n_states, min_weight=0.05):
    """
    Random recipe with n_states split over n_labels nonempty preimages.

    Emissions are mixed with the uniform law so no state has weight
    below min_weight / preimage size.
    """
    if n_labels < 1 or n_states < n_labels:
        raise ValidationError(
            MODULE, "random_ideal_recipe",
            f"need 1 <= n_labels <= n_states, got n_labels={n_labels}, n_states={n_states}",
        )
    extra = rng.multinomial(n_states - n_labels, np.full(n_labels, 1.0 / n_labels))
    sizes = tuple(int(s) for s in 1 + extra)
    T = spread_label_transition(rng, n_labels)
    emissions = []
    for size in sizes:
        q = (1.0 - min_weight) * rng.dirichlet(np.ones(size)) + min_weight / size
        emissions.append(q / q.sum())
    return IdealChainRecipe(label_transition=T, preimage_sizes=sizes, emission_weights=tuple(emissions))


def random_chain(rng, n_states):
    """Dense random chain; every entry positive, so irreducible and aperiodic."""
    if n_states < 1:
        raise ValidationError(MODULE, "random_chain", "n_states must be >= 1")
    return MarkovChainSpec(transition=normalize_rows(rng.dirichlet(np.ones(n_states), size=n_states)))


def iid_chain(probs):
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 1 or np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
        raise ValidationError(MODULE, "iid_chain", "probs must be a probability vector")
    probs = probs / probs.sum()
    return MarkovChainSpec(transition=np.tile(probs, (len(probs), 1)), stationary=probs)


def cycle_chain(n_states):
    """x -> x+1 mod |X| deterministically"""
    if n_states < 1:
        raise ValidationError(MODULE, "cycle_chain", "n_states must be >= 1")
    P = np.roll(np.eye(n_states), 1, axis=1)
    return MarkovChainSpec(transition=P, stationary=np.full(n_states, 1.0 / n_states))


# ============== Sampling ==============

def cumulative_rows(weights):
    cum = np.cumsum(weights, axis=-1)
    return cum / cum[..., -1:]


def draw_index(cum_row, u):
    """Inverse-CDF draw from one cumulative row."""
    return min(bisect_right(cum_row, u), len(cum_row) - 1)


def sample_chain(spec, n, seed, burn_in=0, stream=0):
    """
    Trajectory of length n; the start state is drawn from the stationary
    law and the first burn_in steps are discarded.
    """
    if n < 1:
        raise ValidationError(MODULE, "sample_chain", f"n must be >= 1, got {n}")
    if burn_in < 0:
        raise ValidationError(MODULE, "sample_chain", f"burn_in must be >= 0, got {burn_in}")
    pi = stationary_distribution(spec)
    rng = make_rng(seed, stream)

    start_cum = cumulative_rows(pi).tolist()
    rows = [row.tolist() for row in cumulative_rows(spec.transition)]
    total = burn_in + n
    u = rng.random(total).tolist()

    out = [0] * total
    x = draw_index(start_cum, u[0])
    out[0] = x
    for i in range(1, total):
        x = draw_index(rows[x], u[i])
        out[i] = x

    logger.debug(f"sample_chain: n={n}, burn_in={burn_in}, seed={seed}")
    return ObservationSeries(observations=np.array(out[burn_in:], dtype=np.int64), seed=seed, generator="markov")


# ============== Families ==============

def enumerate_family(n_states, alphabet_size):
    """All |Y|^|X| lookup tables in lexicographic order (first state most significant)."""
    if n_states < 1 or alphabet_size < 1:
        raise ValidationError(MODULE, "enumerate_family", "n_states and alphabet_size must be >= 1")
    size = alphabet_size ** n_states
    if size > FAMILY_GUARD:
        raise GuardError(
            MODULE, "enumerate_family",
            f"|Y|^|X| = {alphabet_size}^{n_states} exceeds {FAMILY_GUARD}; supply an explicit family",
        )
    return [
        LookupTable(alphabet_size=alphabet_size, table=np.array(labels, dtype=np.int64))
        for labels in itertools.product(range(alphabet_size), repeat=n_states)
    ]
