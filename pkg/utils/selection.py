"""
表示函数选择
被动: 在给定序列上对候选族打分 (I_k 或 k_n schedule)，取最大者
主动: 先用均匀随机策略在 MDP 上采样，再按 k=1 做被动选择
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Tuple

from config import DEFAULT_TAU, DEFAULT_WORKERS
from utils.bounds import BoundParams, deviation_bound
from utils.common import NotWeaklyConnectedError, ValidationError, dump_json, write_csv
from utils.core import LookupTable
from utils.estimators import InfoEstimate, iinf_hat, ik_hat
from utils.logger import get_logger
from utils.mdp import check_weakly_connected, sample_mdp, uniform_policy

MODULE = "selection"
logger = get_logger("tsinfo.selection")


@dataclass(frozen=True)
class FixedK:
    k: int


@dataclass(frozen=True)
class Schedule:
    pass


@dataclass(frozen=True)
class SelectionReport:
    scores: Tuple[InfoEstimate, ...]
    best_index: int
    equivalence_class: Tuple[int, ...]
    k_used: int
    n: int
    tau: float
    seed: Optional[int] = None
    diagnostics: Dict[str, float] = field(default_factory=dict)

    @property
    def best_score(self):
        return self.scores[self.best_index].value


def _score(f, series, mode):
    if isinstance(mode, Schedule):
        return iinf_hat(f, series)
    return ik_hat(f, series, mode.k)


def bound_diagnostics(family, n, k, gamma, epsilon):
    """
    deviation_bound for a lookup-table family with d = |X|, the number of
    points the per-label indicator class can shatter at most.
    """
    if not all(isinstance(f, LookupTable) for f in family):
        logger.info("bound_diagnostics: family is not all lookup tables, no VC dimension default")
        return {}
    d = max(f.n_states for f in family)
    alphabet = max(2, max(f.alphabet_size for f in family))
    bound = deviation_bound(BoundParams(d=d, epsilon=epsilon, n=n, gamma=gamma, k=k, alphabet_size=alphabet))
    if bound.vacuous:
        logger.warning(f"bound_diagnostics: deviation bound {bound.value:.6g} is vacuous at n={n}")
    return {
        "d": d,
        "epsilon": epsilon,
        "gamma": gamma,
        "deviation_bound": bound.value,
        "vacuous": bound.vacuous,
    }


def score_family(family, series, mode=FixedK(1), workers=DEFAULT_WORKERS):
    """Scores in candidate order; the thread pool only changes evaluation order."""
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return tuple(pool.map(lambda f: _score(f, series, mode), family))
    return tuple(_score(f, series, mode) for f in family)


def select_passive(family, series, mode=FixedK(1), tau=DEFAULT_TAU, workers=DEFAULT_WORKERS,
                   gamma=None, epsilon=None):
    """
    Score every candidate with the plug-in I_k (or I_inf via the k_n
    schedule) and return the maximizer; ties go to the smallest index.
    """
    family = list(family)
    if not family:
        raise ValidationError(MODULE, "select_passive", "candidate family is empty")
    if tau < 0:
        raise ValidationError(MODULE, "select_passive", f"tau must be >= 0, got {tau}")
    if isinstance(mode, FixedK) and mode.k < 1:
        raise ValidationError(MODULE, "select_passive", f"k must be >= 1, got {mode.k}")

    scores = score_family(family, series, mode, workers)

    values = [s.value for s in scores]
    best_value = max(values)
    best_index = values.index(best_value)
    equivalence = tuple(i for i, v in enumerate(values) if v >= best_value - tau)
    k_used = scores[best_index].k_used

    diagnostics = {}
    if gamma is not None and epsilon is not None:
        diagnostics = bound_diagnostics(family, len(series), k_used, gamma, epsilon)

    logger.debug(
        f"select_passive: {len(family)} candidates, best={best_index} "
        f"({best_value:.6g} bits), {len(equivalence)} within tau={tau}"
    )
    return SelectionReport(
        scores=scores,
        best_index=best_index,
        equivalence_class=equivalence,
        k_used=k_used,
        n=len(series),
        tau=tau,
        seed=series.seed,
        diagnostics=diagnostics,
    )


def select_active(mdp, family, n, seed, tau=DEFAULT_TAU, burn_in=0, workers=DEFAULT_WORKERS,
                  gamma=None, epsilon=None):
    """
    Explore with the uniform policy pi(a | x) = 1/|A|, then select with k=1
    on the observation column.
    """
    connectivity = check_weakly_connected(mdp)
    if not connectivity.connected:
        s, t = connectivity.witness
        raise NotWeaklyConnectedError(MODULE, "select_active", f"state {t} is unreachable from state {s}")
    policy = uniform_policy(mdp.n_states, mdp.n_actions)
    series = sample_mdp(mdp, policy, n, seed, burn_in=burn_in)
    return select_passive(family, series, FixedK(1), tau=tau, workers=workers, gamma=gamma, epsilon=epsilon)


# ============== Output ==============

def score_rows(scores):
    return [
        {"index": i, "score": s.value, "k_used": s.k_used, "n_effective": s.n_effective}
        for i, s in enumerate(scores)
    ]


def write_report(report, out_dir, stem="report"):
    """report_<seed>.csv (one row per candidate) and report_<seed>.json (summary)"""
    out_dir = Path(out_dir)
    suffix = f"_{report.seed}" if report.seed is not None else ""
    members = set(report.equivalence_class)
    rows = [
        {"index": i, "score": s.value, "k_used": s.k_used, "in_equivalence_class": i in members}
        for i, s in enumerate(report.scores)
    ]
    csv_path = write_csv(rows, out_dir / f"{stem}{suffix}.csv",
                         columns=["index", "score", "k_used", "in_equivalence_class"])
    summary = {
        "best_index": report.best_index,
        "best_score": round(report.best_score, 12),
        "equivalence_class": list(report.equivalence_class),
        "k_used": report.k_used,
        "n": report.n,
        "tau": report.tau,
        "seed": report.seed,
        "sparse_support": any(s.sparse_support for s in report.scores),
    }
    if report.diagnostics:
        summary["diagnostics"] = report.diagnostics
    json_path = dump_json(summary, out_dir / f"{stem}{suffix}.json")
    return csv_path, json_path
