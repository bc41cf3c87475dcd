"""
主动情形: 有限 MDP
MDP / 平稳策略、策略诱导链、弱连通检查、策略下的条件独立检查、
策略下的精确 I_1、带动作列的轨迹采样
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order, connected_components

from config import DEFAULT_CI_TOL, ENUMERATION_GUARD
from utils.common import (
    AdmissibilityError, GuardError, ValidationError, load_json, make_rng,
)
from utils.core import LookupTable, ObservationSeries
from utils.logger import get_logger
from utils.oracle import (
    CICheck, MarkovChainSpec, closed_classes, context_violation, exact_ik,
    label_conditional, normalize_rows, stationary_distribution,
)
from utils.processes import cumulative_rows, draw_index, random_ideal_recipe, spread_label_transition

MODULE = "mdp"
logger = get_logger("tsinfo.mdp")

ROW_SUM_TOL = 1e-12
ACTION_STREAM_OFFSET = 1 << 32


# ============== Types ==============

@dataclass(frozen=True, eq=False)
class MdpSpec:
    """transition[x, a, x'] = P(x' | x, a)"""

    transition: np.ndarray

    def __post_init__(self):
        P = np.array(self.transition, dtype=np.float64)
        if P.ndim != 3 or P.shape[0] != P.shape[2] or 0 in P.shape:
            raise ValidationError(MODULE, "MdpSpec", f"transition must have shape (|X|, |A|, |X|), got {P.shape}")
        if np.any(P < 0):
            raise ValidationError(MODULE, "MdpSpec", "negative transition probability")
        worst = float(np.abs(P.sum(axis=2) - 1.0).max())
        if worst > ROW_SUM_TOL:
            raise ValidationError(MODULE, "MdpSpec", f"every (x, a) row must sum to 1 (worst deviation {worst:.3g})")
        P.flags.writeable = False
        object.__setattr__(self, "transition", P)

    @property
    def n_states(self):
        return self.transition.shape[0]

    @property
    def n_actions(self):
        return self.transition.shape[1]


@dataclass(frozen=True, eq=False)
class StationaryPolicy:
    """probs[x, a] = pi(a | x)"""

    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=np.float64)
        if p.ndim != 2 or 0 in p.shape:
            raise ValidationError(MODULE, "StationaryPolicy", f"probs must have shape (|X|, |A|), got {p.shape}")
        if np.any(p < 0) or float(np.abs(p.sum(axis=1) - 1.0).max()) > ROW_SUM_TOL:
            raise ValidationError(MODULE, "StationaryPolicy", "every state's action law must be a probability vector")
        p.flags.writeable = False
        object.__setattr__(self, "probs", p)

    @property
    def alpha_floor(self):
        return float(self.probs.min())

    @property
    def stochastic(self):
        return self.alpha_floor > 0

    @property
    def state_independent(self):
        """Every state uses the same action law."""
        return bool(np.abs(self.probs - self.probs[0]).max() <= ROW_SUM_TOL)


def _check_pair(mdp, policy, operation):
    if policy.probs.shape != (mdp.n_states, mdp.n_actions):
        raise ValidationError(
            MODULE, operation,
            f"policy shape {policy.probs.shape} does not match MDP ({mdp.n_states}, {mdp.n_actions})",
        )


# ============== Policies ==============

def uniform_policy(n_states, n_actions):
    return StationaryPolicy(probs=np.full((n_states, n_actions), 1.0 / n_actions))


def state_independent_policy(action_probs, n_states):
    action_probs = np.asarray(action_probs, dtype=np.float64)
    return StationaryPolicy(probs=np.tile(action_probs, (n_states, 1)))


def deterministic_policy(actions, n_actions):
    actions = np.asarray(actions, dtype=np.int64)
    if actions.min() < 0 or actions.max() >= n_actions:
        raise ValidationError(MODULE, "deterministic_policy", f"actions must lie in [0, {n_actions - 1}]")
    return StationaryPolicy(probs=np.eye(n_actions)[actions])


def random_stochastic_policy(rng, n_states, n_actions, alpha=0.05):
    """Random state-dependent policy with pi(a | x) >= alpha everywhere."""
    if not 0.0 < alpha <= 1.0 / n_actions:
        raise ValidationError(MODULE, "random_stochastic_policy", f"alpha must lie in (0, 1/|A|], got {alpha!r}")
    free = 1.0 - n_actions * alpha
    probs = alpha + free * rng.dirichlet(np.ones(n_actions), size=n_states)
    return StationaryPolicy(probs=normalize_rows(probs))


def random_state_independent_policy(rng, n_states, n_actions, alpha=0.05):
    if not 0.0 < alpha <= 1.0 / n_actions:
        raise ValidationError(MODULE, "random_state_independent_policy", f"alpha must lie in (0, 1/|A|], got {alpha!r}")
    row = alpha + (1.0 - n_actions * alpha) * rng.dirichlet(np.ones(n_actions))
    return state_independent_policy(row / row.sum(), n_states)


def policy_mixture(first, second, lam):
    """lam * first + (1 - lam) * second, state by state"""
    if not 0.0 <= lam <= 1.0:
        raise ValidationError(MODULE, "policy_mixture", f"lambda must lie in [0, 1], got {lam!r}")
    if first.probs.shape != second.probs.shape:
        raise ValidationError(MODULE, "policy_mixture", "policies have different shapes")
    return StationaryPolicy(probs=lam * first.probs + (1.0 - lam) * second.probs)


# ============== Induced Chain / Connectivity ==============

def induced_chain(mdp, policy):
    """M(x' | x) = sum_a pi(a | x) P(x' | x, a)"""
    _check_pair(mdp, policy, "induced_chain")
    M = np.einsum("xa,xay->xy", policy.probs, mdp.transition)
    return MarkovChainSpec(transition=normalize_rows(M))


def _admissible(mdp, policy, operation):
    chain = induced_chain(mdp, policy)
    classes = closed_classes(chain.transition)
    if len(classes) != 1:
        raise AdmissibilityError(MODULE, operation, classes)
    return chain


@dataclass(frozen=True)
class WeakConnectivity:
    connected: bool
    witness: Optional[Tuple[int, int]] = None


def check_weakly_connected(mdp):
    """
    Strong connectivity of the digraph with an edge x -> x' whenever
    some action reaches x' from x. witness is an ordered pair (s, t)
    with t unreachable from s.
    """
    graph = csr_matrix((mdp.transition > 0).any(axis=1))
    n_comp, _ = connected_components(graph, directed=True, connection="strong")
    if n_comp == 1:
        return WeakConnectivity(connected=True)
    for s in range(mdp.n_states):
        reached = set(breadth_first_order(graph, s, directed=True, return_predecessors=False).tolist())
        for t in range(mdp.n_states):
            if t not in reached:
                return WeakConnectivity(connected=False, witness=(s, t))
    return WeakConnectivity(connected=False)


# ============== Exact Checks Under a Policy ==============

def stationary_window_law(mdp, policy, operation="ci_check_under_policy"):
    """
    Stationary joint law of (X_-1, A_-1, X_0, A_0, X_1, A_1).
    """
    span = (mdp.n_states * mdp.n_actions) ** 3
    if span > ENUMERATION_GUARD:
        raise GuardError(MODULE, operation, f"(|X||A|)^3 = {span} exceeds the enumeration guard {ENUMERATION_GUARD}")
    chain = _admissible(mdp, policy, operation)
    mu = stationary_distribution(chain)
    pi, P = policy.probs, mdp.transition
    return np.einsum("i,ia,iaj,jb,jbk,kc->iajbkc", mu, pi, P, pi, P, pi), mu


def ci_checks_under_policy(mdp, policy, family, tol=DEFAULT_CI_TOL, own_action=True):
    """
    Compares P(X_0 | f(X_0), X_-1, A_-1, A_0, X_1, A_1) against
    P(X_0 | f(X_0), A_0) (own_action=True) or P(X_0 | f(X_0))
    (own_action=False) on every positive-probability tuple, for every
    f in the family. The window law is built once per policy.
    """
    _check_pair(mdp, policy, "ci_check_under_policy")
    for f in family:
        if not isinstance(f, LookupTable) or f.n_states != mdp.n_states:
            raise ValidationError(MODULE, "ci_check_under_policy", "f must be a lookup table over the MDP states")

    joint, mu = stationary_window_law(mdp, policy)
    X = mdp.n_states
    context = np.moveaxis(joint, 2, -1)                     # (x-1, a-1, a0, x1, a1, x0)
    weights = context.reshape(-1, X)
    by_state = mu[:, None] * policy.probs                   # (x0, a0)

    results = []
    for f in family:
        if own_action:
            by_action = label_conditional(by_state.T, f.table, f.alphabet_size)    # (a0, x0)
            reference = np.broadcast_to(by_action[None, None, :, None, None, :], context.shape).reshape(-1, X)
        else:
            reference = label_conditional(mu, f.table, f.alphabet_size)
        violation = context_violation(weights, f.table, f.alphabet_size, reference)
        results.append(CICheck(passed=violation <= tol, max_violation=violation))
    return results


def ci_check_under_policy(mdp, policy, f, tol=DEFAULT_CI_TOL, own_action=True):
    return ci_checks_under_policy(mdp, policy, [f], tol=tol, own_action=own_action)[0]


def exact_i1_under_policy(mdp, policy, f):
    chain = _admissible(mdp, policy, "exact_i1_under_policy")
    return exact_ik(chain, f, 1)


def exact_argmax_under_policy(mdp, policy, family, tol=1e-12):
    """
    Index of the exact I_1 maximizer under the policy; ties within tol go to
    the smallest index.

    The maximizer is only guaranteed to satisfy CI for state-independent
    exploration. A state-dependent policy makes the action carry information
    about the state, and the maximizer can then be a non-CI map.
    """
    chain = _admissible(mdp, policy, "exact_argmax_under_policy")
    if not policy.state_independent:
        logger.warning("exact_argmax_under_policy: state-dependent policy, the maximizer need not satisfy CI")
    values = [exact_ik(chain, g, 1) for g in family]
    best = max(values)
    return next(i for i, v in enumerate(values) if v >= best - tol)


# ============== Sampling ==============

def sample_mdp(mdp, policy, n, seed, burn_in=0, stream=0):
    """
    (x_i, a_i) trajectory: a_i ~ pi(. | x_i), x_{i+1} ~ P(. | x_i, a_i),
    x_0 drawn from the stationary law of the induced chain.
    """
    _check_pair(mdp, policy, "sample_mdp")
    if n < 1 or burn_in < 0:
        raise ValidationError(MODULE, "sample_mdp", f"need n >= 1 and burn_in >= 0, got n={n}, burn_in={burn_in}")
    chain = _admissible(mdp, policy, "sample_mdp")
    mu = stationary_distribution(chain)
    start_cum = cumulative_rows(mu).tolist()
    action_rows = [row.tolist() for row in cumulative_rows(policy.probs)]
    next_rows = [[row.tolist() for row in per_state] for per_state in cumulative_rows(mdp.transition)]
    total = burn_in + n
    # states use the same stream layout as sample_chain; actions get their own stream
    u_state = make_rng(seed, stream).random(total).tolist()
    u_action = make_rng(seed, stream + ACTION_STREAM_OFFSET).random(total).tolist()

    states = [0] * total
    actions = [0] * total
    x = draw_index(start_cum, u_state[0])
    for i in range(total):
        a = draw_index(action_rows[x], u_action[i])
        states[i] = x
        actions[i] = a
        if i + 1 < total:
            x = draw_index(next_rows[x][a], u_state[i + 1])

    return ObservationSeries(
        observations=np.array(states[burn_in:], dtype=np.int64),
        actions=np.array(actions[burn_in:], dtype=np.int64),
        seed=seed,
        generator="mdp",
    )


# ============== Generators ==============

def build_ideal_mdp(label_transitions, preimage_sizes, emission_weights):
    """
    P(x' | x, a) = T_a(f(x), f(x')) * q(x' | f(x')), one label transition
    per action and a shared emission law. Returns (mdp, f).
    """
    T = np.asarray(label_transitions, dtype=np.float64)
    sizes = np.asarray(preimage_sizes, dtype=np.int64)
    if T.ndim != 3 or T.shape[1] != T.shape[2] or T.shape[1] != len(sizes):
        raise ValidationError(MODULE, "build_ideal_mdp", "label transitions must have shape (|A|, |Y|, |Y|)")
    if np.any(T < 0) or float(np.abs(T.sum(axis=2) - 1.0).max()) > ROW_SUM_TOL:
        raise ValidationError(MODULE, "build_ideal_mdp", "every label transition must be row-stochastic")
    if sizes.min() < 1 or len(emission_weights) != len(sizes):
        raise ValidationError(MODULE, "build_ideal_mdp", "every label needs a nonempty preimage and an emission law")

    table = np.repeat(np.arange(len(sizes)), sizes)
    q = np.concatenate([np.asarray(w, dtype=np.float64) for w in emission_weights])
    if q.shape != table.shape or np.any(q <= 0):
        raise ValidationError(MODULE, "build_ideal_mdp", "emission weights must be positive and match the preimages")

    per_action = T[:, table][:, :, table] * q[None, None, :]        # (a, x, x')
    P = normalize_rows(np.transpose(per_action, (1, 0, 2)))
    return MdpSpec(transition=P), LookupTable(alphabet_size=len(sizes), table=table)


def random_ideal_mdp(rng, n_labels, n_states, n_actions):
    recipe = random_ideal_recipe(rng, n_labels, n_states)
    transitions = [recipe.label_transition] + [spread_label_transition(rng, n_labels) for _ in range(n_actions - 1)]
    return build_ideal_mdp(transitions, recipe.preimage_sizes, recipe.emission_weights)


def random_mdp(rng, n_states, n_actions):
    """Dense random MDP, every transition positive."""
    if n_states < 1 or n_actions < 1:
        raise ValidationError(MODULE, "random_mdp", "n_states and n_actions must be >= 1")
    P = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    return MdpSpec(transition=normalize_rows(P))


# ============== JSON ==============

def mdp_to_json(mdp):
    return {
        "n_states": mdp.n_states,
        "n_actions": mdp.n_actions,
        "transition": mdp.transition.ravel().tolist(),
    }


def mdp_from_json(data):
    try:
        shape = (int(data["n_states"]), int(data["n_actions"]), int(data["n_states"]))
        return MdpSpec(transition=np.array(data["transition"], dtype=np.float64).reshape(shape))
    except (KeyError, ValueError) as e:
        raise ValidationError(MODULE, "mdp_from_json", f"malformed MDP spec: {e}") from e


def policy_to_json(policy):
    n_states, n_actions = policy.probs.shape
    return {"n_states": n_states, "n_actions": n_actions, "probs": policy.probs.ravel().tolist()}


def policy_from_json(data):
    try:
        shape = (int(data["n_states"]), int(data["n_actions"]))
        return StationaryPolicy(probs=np.array(data["probs"], dtype=np.float64).reshape(shape))
    except (KeyError, ValueError) as e:
        raise ValidationError(MODULE, "policy_from_json", f"malformed policy: {e}") from e


def load_mdp(path):
    return mdp_from_json(load_json(path, MODULE, "load_mdp"))
