import pytest

from tdcheck import AbstractSpec, Bounds, SafraSpec
from tdcheck.explicit import bfs_check, check_leadsto, check_quiescence, explore_graph
from tdcheck.kernel import STUTTER, Fairness, LeadsTo, replay
from tdcheck.report import render_text


def test_abstract_counts_small():
    assert bfs_check(AbstractSpec(4), Bounds(K=3), ["TypeOK", "SafeInv"]).distinct_states == 4097


def test_count_mode_counts_boundary_states():
    discard = bfs_check(AbstractSpec(3), Bounds(K=1), ["TypeOK"])
    count = bfs_check(AbstractSpec(3), Bounds(K=1), ["TypeOK"], constraint_mode="count")
    assert count.distinct_states > discard.distinct_states
    assert count.stats["constraint_mode"] == "count"


def test_drop_send_guard_minimal_counterexample():
    spec = AbstractSpec(4, "drop-send-guard")
    r = bfs_check(spec, Bounds(K=3), ["SafeInv"])
    assert r.verdict == "violation" and r.violated_property == "SafeInv"
    tr = r.counterexample
    last_pre = tr.states[-2]
    assert tr.labels[-1].action == "SendMsg"
    assert not any(last_pre.active) and not any(last_pre.pending) and last_pre.term_detect
    assert replay(spec, tr) is None
    # an initial detected state already enables the bad send, so one step is minimal
    assert len(tr.labels) == 1


def test_quiescence():
    assert check_quiescence(AbstractSpec(4), Bounds(K=3)).passed
    bad = check_quiescence(AbstractSpec(3, "drop-send-guard"), Bounds(K=2))
    assert bad.verdict == "violation" and bad.violated_property == "Quiescence"


def test_worker_count_does_not_change_results():
    spec, b = SafraSpec(2), Bounds(K=1, C=1, Q=2)
    one = bfs_check(spec, b, ["TypeOK", "Inv"], workers=1)
    two = bfs_check(spec, b, ["TypeOK", "Inv"], workers=2)
    assert (one.verdict, one.distinct_states, one.diameter) == (two.verdict, two.distinct_states, two.diameter)
    m = SafraSpec(4, "token-adopts-node-color")
    a = bfs_check(m, Bounds(K=1, C=1, Q=2), ["Inv"], workers=1)
    c = bfs_check(m, Bounds(K=1, C=1, Q=2), ["Inv"], workers=2)
    assert a.counterexample == c.counterexample


def test_budget_exhaustion_is_inconclusive():
    r = bfs_check(AbstractSpec(3), Bounds(K=2), ["TypeOK"], max_states=10)
    assert r.verdict == "inconclusive" and r.exit_code == 2


def test_probabilistic_mode_flagged():
    r = bfs_check(AbstractSpec(3), Bounds(K=1), ["TypeOK"], exact=False)
    assert r.soundness == "probabilistic"
    assert r.distinct_states == bfs_check(AbstractSpec(3), Bounds(K=1), ["TypeOK"]).distinct_states


def test_live_passes_and_fails_without_fairness():
    spec = AbstractSpec(3)
    assert check_leadsto(spec, Bounds(K=2), "Live").passed
    r = check_leadsto(spec, Bounds(K=2), "Live", fairness=())
    assert r.verdict == "violation"
    tr = r.counterexample
    assert tr.loop_label == STUTTER
    s = tr.states[tr.loop_start]
    assert not any(s.active) and not any(s.pending) and not s.term_detect
    assert "cycle:" in render_text(r, spec)


def test_leadsto_on_prebuilt_graph():
    spec = SafraSpec(2)
    _, g = explore_graph(spec, Bounds(K=1, C=1, Q=2))
    for prop in ("round1", "round2", "round3", "Live", "refinement-fairness"):
        assert check_leadsto(spec, g.bounds, prop, graph=g).passed, prop


@pytest.mark.parametrize("mutant", ["no-initiate-when-black", "no-whiten-on-pass"])
def test_liveness_mutants_produce_fair_lassos(mutant):
    spec = SafraSpec(2, mutant)
    r = check_leadsto(spec, Bounds(K=1, C=1, Q=2), "Live")
    assert r.verdict == "violation"
    tr = r.counterexample
    assert tr.is_lasso and replay(spec, tr) is None
    assert any(not any(s.active) and not any(s.pending) for s in tr.states[tr.loop_start:])


def test_bounds_masking_progress_is_inconclusive():
    # An active node that keeps messaging itself and terminating is a fair
    # non-detecting cycle, but with K = 0 every send leaves the box.
    fair = (Fairness(frozenset({"Terminate"})), Fairness(frozenset({"DetectTermination"})))
    lt = LeadsTo("active-detects", lambda s: s.active[0], lambda s: s.term_detect, fair)
    r = check_leadsto(AbstractSpec(1), Bounds(K=0), lt)
    assert r.verdict == "inconclusive" and "mask" in r.message
    assert check_leadsto(AbstractSpec(1), Bounds(K=1), lt).verdict == "violation"


def test_safra_small_instance_properties():
    r = bfs_check(SafraSpec(2), Bounds(K=1, C=1, Q=2), ["TypeOK", "Inv", "Safe", "LemmaSafety", "EnabledDT"],
                  ["Quiescence", "refinement-step"])
    assert r.passed, r.message


def test_pass_while_active_safety_fails_liveness_independent():
    spec = SafraSpec(3, "pass-while-active")
    b = Bounds(K=1, C=1, Q=2)
    assert bfs_check(spec, b, ["Inv"]).verdict == "violation"
    assert check_leadsto(spec, b, "round1").passed
