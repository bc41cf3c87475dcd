"""
Tests for utils/selection.py - passive / active representation selection
"""
import sys
import json
import logging
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent))

import numpy as np
import pytest

from utils.common import NotWeaklyConnectedError, ValidationError, make_rng
from utils.core import LookupTable, constant_table, identity_table, permute_labels
from utils.estimators import ik_hat
from utils.mdp import MdpSpec, induced_chain, uniform_policy
from utils.oracle import MarkovChainSpec, ci_check_markov
from utils.processes import build_ideal_chain, enumerate_family, sample_chain, uniform_recipe
from utils.selection import (
    FixedK, Schedule, score_family, select_active, select_passive, write_report,
)

DEPENDENT = MarkovChainSpec(transition=np.array([[0.9, 0.1], [0.1, 0.9]]))


def test_dependent_chain_prefers_identity():
    """Constant scores 0, identity scores about I_1"""
    s = sample_chain(DEPENDENT, 5000, seed=1)
    report = select_passive([constant_table(2), identity_table(2)], s)
    assert report.best_index == 1
    assert report.scores[0].value == 0.0
    assert report.scores[1].value > 0.4
    assert report.equivalence_class == (1,)
    assert report.seed == 1
    print("✅ test_dependent_chain_prefers_identity passed")


def test_tie_break_lowest_index():
    """Two constants tie: index 0 wins, both in the equivalence class"""
    s = sample_chain(DEPENDENT, 100, seed=0)
    family = [constant_table(2, 2, 0), constant_table(2, 2, 1)]
    report = select_passive(family, s)
    assert report.best_index == 0
    assert report.best_score == 0.0
    assert report.equivalence_class == (0, 1)
    print("✅ test_tie_break_lowest_index passed")


def test_scores_are_ik_hat():
    """Report scores recompute independently"""
    spec, _, _ = build_ideal_chain(uniform_recipe([[0.8, 0.2], [0.3, 0.7]], (2, 1)))
    s = sample_chain(spec, 3000, seed=5)
    family = enumerate_family(3, 2)
    report = select_passive(family, s, FixedK(2))
    for f, score in zip(family, report.scores):
        assert score.value == ik_hat(f, s, 2).value
        assert score.k_used == 2
    print("✅ test_scores_are_ik_hat passed")


def test_workers_do_not_change_result():
    """Thread pool evaluation keeps candidate order"""
    s = sample_chain(DEPENDENT, 2000, seed=3)
    family = enumerate_family(2, 2) + [identity_table(2)]
    serial = score_family(family, s, FixedK(1), workers=1)
    parallel = score_family(family, s, FixedK(1), workers=4)
    assert [x.value for x in serial] == [x.value for x in parallel]
    print("✅ test_workers_do_not_change_result passed")


def test_schedule_mode():
    """Schedule mode reports the k_n it used"""
    s = sample_chain(DEPENDENT, 10**4, seed=2)
    report = select_passive([identity_table(2)], s, Schedule())
    assert report.k_used == 3
    print("✅ test_schedule_mode passed")


def test_relabeling_does_not_change_selection_scores():
    """A label permutation of a candidate has the identical score"""
    s = sample_chain(DEPENDENT, 2000, seed=8)
    f = LookupTable(alphabet_size=2, table=np.array([0, 1]))
    report = select_passive([f, permute_labels(f, [1, 0])], s)
    assert report.scores[0].value == report.scores[1].value
    assert report.best_index == 0
    print("✅ test_relabeling_does_not_change_selection_scores passed")


def test_validation():
    """Empty family, negative tau and k < 1 are rejected"""
    s = sample_chain(DEPENDENT, 50, seed=0)
    with pytest.raises(ValidationError):
        select_passive([], s)
    with pytest.raises(ValidationError):
        select_passive([identity_table(2)], s, tau=-1.0)
    with pytest.raises(ValidationError):
        select_passive([identity_table(2)], s, FixedK(0))
    print("✅ test_validation passed")


def test_select_passive_logs_at_debug():
    """Per-call summary stays below INFO so verify output is one line per suite"""
    records = []
    handler = logging.Handler(level=logging.DEBUG)
    handler.emit = records.append
    log = logging.getLogger("tsinfo.selection")
    old_level = log.level
    log.addHandler(handler)
    log.setLevel(logging.DEBUG)
    try:
        select_passive([constant_table(2), identity_table(2)], sample_chain(DEPENDENT, 500, seed=0))
    finally:
        log.removeHandler(handler)
        log.setLevel(old_level)
    assert any("select_passive" in r.getMessage() for r in records)
    assert all(r.levelno < logging.INFO for r in records)
    print("✅ test_select_passive_logs_at_debug passed")


def test_recovery_on_ideal_chain():
    """Full 16-map family on the ideal 4-state chain selects a CI map"""
    spec, _, _ = build_ideal_chain(uniform_recipe([[0.9, 0.1], [0.1, 0.9]], (2, 2)))
    family = enumerate_family(4, 2)
    for seed in range(3):
        report = select_passive(family, sample_chain(spec, 20_000, seed=seed))
        assert ci_check_markov(spec, family[report.best_index]).passed
    print("✅ test_recovery_on_ideal_chain passed")


def test_recovery_improves_with_n():
    """Share of seeds that select a CI map does not drop as n grows"""
    spec, _, _ = build_ideal_chain(uniform_recipe([[0.9, 0.1], [0.1, 0.9]], (2, 2)))
    family = enumerate_family(4, 2)
    seeds = range(4)
    fractions = []
    for n in (1_000, 10_000, 100_000):
        hits = 0
        for seed in seeds:
            report = select_passive(family, sample_chain(spec, n, seed=seed))
            hits += ci_check_markov(spec, family[report.best_index]).passed
        fractions.append(hits / len(seeds))
    # one seed of Monte-Carlo slack between sizes
    assert all(b >= a - 1.0 / len(seeds) for a, b in zip(fractions, fractions[1:]))
    assert fractions[-1] == 1.0
    print("✅ test_recovery_improves_with_n passed")


def test_bound_diagnostics():
    """d = |X| for lookup-table families when gamma and eps are given"""
    s = sample_chain(DEPENDENT, 500, seed=0)
    report = select_passive([identity_table(2)], s, gamma=0.8, epsilon=0.5)
    assert report.diagnostics["d"] == 2
    assert report.diagnostics["vacuous"]
    assert select_passive([identity_table(2)], s).diagnostics == {}
    print("✅ test_bound_diagnostics passed")


def test_select_active_single_action():
    """One action: same report as passive selection on the induced chain trajectory"""
    mdp = MdpSpec(transition=np.array([[[0.75, 0.25]], [[0.5, 0.5]]]))
    family = enumerate_family(2, 2)
    active = select_active(mdp, family, 3000, seed=6)
    chain = induced_chain(mdp, uniform_policy(2, 1))
    passive = select_passive(family, sample_chain(chain, 3000, seed=6))
    assert active.best_index == passive.best_index
    assert [x.value for x in active.scores] == [x.value for x in passive.scores]

    again = select_active(mdp, family, 3000, seed=6)
    assert [x.value for x in again.scores] == [x.value for x in active.scores]
    print("✅ test_select_active_single_action passed")


def test_select_active_needs_connectivity():
    """Absorbing states are refused with a witness"""
    mdp = MdpSpec(transition=np.stack([np.eye(2), np.eye(2)], axis=1))
    with pytest.raises(NotWeaklyConnectedError, match="unreachable"):
        select_active(mdp, enumerate_family(2, 2), 100, seed=0)
    print("✅ test_select_active_needs_connectivity passed")


def test_write_report():
    """report_<seed>.csv plus a JSON summary"""
    s = sample_chain(DEPENDENT, 1000, seed=7)
    report = select_passive([constant_table(2), identity_table(2)], s)
    with tempfile.TemporaryDirectory() as tmp:
        csv_path, json_path = write_report(report, tmp)
        assert csv_path.name == "report_7.csv"
        lines = csv_path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "index,score,k_used,in_equivalence_class"
        assert lines[1] == "0,0,1,False"
        summary = json.loads(json_path.read_text(encoding="utf-8"))
        assert summary["best_index"] == 1
        assert summary["seed"] == 7
        assert summary["n"] == 1000
        assert summary["equivalence_class"] == [1]
    print("✅ test_write_report passed")


if __name__ == "__main__":
    test_dependent_chain_prefers_identity()
    test_tie_break_lowest_index()
    test_scores_are_ik_hat()
    test_workers_do_not_change_result()
    test_schedule_mode()
    test_relabeling_does_not_change_selection_scores()
    test_validation()
    test_select_passive_logs_at_debug()
    test_recovery_on_ideal_chain()
    test_recovery_improves_with_n()
    test_bound_diagnostics()
    test_select_active_single_action()
    test_select_active_needs_connectivity()
    test_write_report()
    print("\n✅ All selection tests passed")
