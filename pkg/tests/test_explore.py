import pytest

from tdcheck import AbstractSpec, Bounds, ConfigurationError, SafraSpec
from tdcheck.explore import ExploreConfig, explore, explore_from_inv, random_walk
from tdcheck.kernel import Trace, replay

SAFRA_PROPS = ("TypeOK", "Inv", "refinement-step", "refinement-fairness")


def test_walk_length_one_is_initial_state():
    spec = SafraSpec(3)
    r = random_walk(spec, seed=4, walk_length=1, properties=("TypeOK",))
    walk = Trace.from_json(spec, r.stats["walk"])
    assert len(walk.states) == 1 and spec.is_initial(walk.states[0])


def test_random_walk_deterministic():
    spec = SafraSpec(4)
    a = random_walk(spec, seed=11, walk_length=60)
    b = random_walk(spec, seed=11, walk_length=60)
    assert a.stats["walk"] == b.stats["walk"]
    assert replay(spec, Trace.from_json(spec, a.stats["walk"])) is None


def test_label_rule_walk_is_legal():
    spec = SafraSpec(3)
    r = random_walk(spec, seed=2, walk_length=40, choice="label", properties=SAFRA_PROPS)
    assert r.verdict == "pass"
    assert replay(spec, Trace.from_json(spec, r.stats["walk"])) is None


def test_explore_deterministic_with_walk_cap():
    cfg = ExploreConfig(walk_length=30, budget_ms=60_000, seed=5, properties=SAFRA_PROPS, max_walks=40)
    a, b = explore(SafraSpec(3), config=cfg), explore(SafraSpec(3), config=cfg)
    assert a.stats["walks"] == b.stats["walks"] == 40
    assert a.stats["steps"] == b.stats["steps"]


def test_unmutated_is_inconclusive_with_stats():
    r = explore(SafraSpec(4), config=ExploreConfig(budget_ms=300, properties=SAFRA_PROPS))
    assert r.verdict == "inconclusive" and "coverage" in r.message
    assert r.stats["walks"] > 0 and r.stats["violations"] == 0 and r.soundness == "random"


@pytest.mark.parametrize("mutant", ["token-adopts-node-color", "no-whiten-on-pass", "token-init-white"])
def test_mutant_found_and_replayable(mutant):
    spec = SafraSpec(5, mutant)
    r = explore(spec, config=ExploreConfig(budget_ms=3000, seed=1, properties=SAFRA_PROPS))
    assert r.verdict == "violation"
    assert replay(spec, r.counterexample) is None


def test_liveness_lasso_on_mutant():
    spec = SafraSpec(3, "no-initiate-when-black")
    r = explore(spec, config=ExploreConfig(budget_ms=3000, seed=0, properties=("refinement-fairness",)))
    assert r.verdict == "violation" and r.counterexample.loop_start is not None


def test_explore_from_inv_finds_one_step_violation():
    spec = AbstractSpec(2, "drop-send-guard")
    cfg = ExploreConfig(walk_length=2, budget_ms=3000, properties=("IndInv",))
    r = explore_from_inv(spec, "IndInv", Bounds(K=1), cfg)
    assert r.verdict == "violation" and len(r.counterexample.states) == 2
    assert replay(spec, r.counterexample, from_init=False) is None


def test_explore_from_unsatisfiable_inv():
    spec = SafraSpec(2)
    never = lambda s: False
    r = explore_from_inv(spec, [never], Bounds(K=1, C=1, Q=1), ExploreConfig(budget_ms=300))
    assert r.verdict == "inconclusive" and "sparse" in r.message


def test_two_walkers():
    r = explore(SafraSpec(3), config=ExploreConfig(walkers=2, budget_ms=400, properties=("Inv",)))
    assert r.verdict == "inconclusive" and r.stats["walkers"] == 2 and r.stats["walks"] > 0


def test_bad_config():
    with pytest.raises(ConfigurationError):
        ExploreConfig(walk_length=0)
    with pytest.raises(ConfigurationError):
        ExploreConfig(choice="weighted")
    with pytest.raises(ConfigurationError):
        explore(SafraSpec(2), config=ExploreConfig(properties=("NoSuchProp",)))
