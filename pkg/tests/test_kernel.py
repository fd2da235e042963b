import pickle
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tdcheck import AbstractSpec, Bounds, ConfigurationError, Label, SafraSpec, Trace, make_spec
from tdcheck.abstract import AbstractState
from tdcheck.kernel import STUTTER, replay


def test_label_round_trip():
    lab = Label("SendMsg", (0, 2))
    assert str(lab) == "SendMsg(0, 2)"
    assert Label.parse(str(lab)) == lab
    assert Label.parse("InitiateProbe") == Label("InitiateProbe")


@pytest.mark.parametrize("n", [0, -1, True, 1.5])
def test_bad_n_rejected(n):
    with pytest.raises(ConfigurationError):
        AbstractSpec(n)


def test_negative_bounds_rejected():
    with pytest.raises(ConfigurationError):
        Bounds(K=-1)


def test_unknown_names_rejected():
    spec = SafraSpec(2)
    for call in (lambda: spec.state_predicate("Nope"), lambda: spec.action_predicate("Nope"),
                 lambda: spec.leadsto("Nope"), lambda: make_spec("ewd840", 2),
                 lambda: SafraSpec(2, "no-such-mutant")):
        with pytest.raises(ConfigurationError):
            call()


def test_label_arity_checked():
    spec = SafraSpec(3)
    spec.check_label(Label("PassToken", (2,)))
    with pytest.raises(ConfigurationError):
        spec.check_label(Label("PassToken", (1, 2)))
    with pytest.raises(ConfigurationError):
        spec.check_label(Label("SendMsg", (0, 3)))


def test_specs_pickle():
    spec = SafraSpec(3, "token-init-white")
    clone = pickle.loads(pickle.dumps(spec))
    assert clone.params == spec.params


def test_initial_counts():
    assert len(list(AbstractSpec(2).initial_states())) == 5
    assert len(list(AbstractSpec(1).initial_states())) == 3
    init = list(SafraSpec(1).initial_states())
    assert len(init) == 4
    assert all(s.counter == (0,) and s.pending == (0,) and tuple(s.token) == (0, 1, 0) for s in init)


def test_initial_states_unique():
    for spec in (AbstractSpec(3), SafraSpec(3)):
        states = list(spec.initial_states())
        assert len(states) == len(set(states))
        assert all(spec.is_initial(s) for s in states)


def test_successors_deterministic():
    spec = SafraSpec(3)
    rng = random.Random(3)
    for _ in range(200):
        s = spec.sample(Bounds(K=2, C=2, Q=3), rng)
        assert spec.successors(s) == spec.successors(s)


def test_successor_order_follows_action_table():
    spec = SafraSpec(3)
    rng = random.Random(4)
    for _ in range(200):
        s = spec.sample(Bounds(K=2, C=2, Q=3), rng)
        keys = [(spec.actions.index(l.action), l.args) for l, _ in spec.successors(s)]
        assert keys == sorted(keys)


def test_no_stutter_edges():
    for spec in (AbstractSpec(1), SafraSpec(1), SafraSpec(2)):
        for s in spec.universe(Bounds(K=1, C=1, Q=1)):
            assert all(t != s for _, t in spec.successors(s))


def test_enabled_empty_set_is_false():
    spec = AbstractSpec(2)
    s = AbstractState((False, False), (0, 0), False)
    assert not spec.enabled((), s)
    assert spec.enabled(("DetectTermination",), s)


def test_fingerprints():
    spec = AbstractSpec(2)
    a = AbstractState((False, False), (1, 0), False)
    b = AbstractState((False, False), (0, 1), False)
    c = AbstractState((False, False), (1, 0), True)
    assert spec.fingerprint(a) == spec.fingerprint(AbstractState((False, False), (1, 0), False))
    assert len({spec.encode(a), spec.encode(b), spec.encode(c)}) == 3
    assert len(spec.fingerprint(a)) == 16


def test_fingerprint_stable_value():
    # Frozen for format version 1; a change here means traces are no longer comparable.
    spec = SafraSpec(2)
    s = next(iter(spec.initial_states()))
    assert spec.encode(s)[:4] == bytes([1, 2, 2, 0])
    assert spec.fingerprint(s) == spec.fingerprint(spec.decode(spec.encode(s)))


safra_states = st.integers(1, 4).flatmap(lambda n: st.tuples(
    st.just(n),
    st.lists(st.booleans(), min_size=n, max_size=n),
    st.lists(st.integers(0, 50), min_size=n, max_size=n),
    st.lists(st.integers(0, 1), min_size=n, max_size=n),
    st.lists(st.integers(-50, 50), min_size=n, max_size=n),
    st.integers(0, n - 1), st.integers(0, 1), st.integers(-99, 99),
))


@settings(max_examples=200, deadline=None)
@given(safra_states)
def test_safra_encoding_round_trip(data):
    n, a, p, c, k, tp, tc, tq = data
    spec = SafraSpec(n)
    doc = {"active": a, "pending": p, "color": ["white", "black"] and [("white", "black")[x] for x in c],
           "counter": k, "token": {"p": tp, "c": ("white", "black")[tc], "q": tq}}
    s = spec.state_from_json(doc)
    assert spec.decode(spec.encode(s)) == s
    assert spec.state_to_json(s) == doc


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 5).flatmap(lambda n: st.tuples(
    st.lists(st.booleans(), min_size=n, max_size=n),
    st.lists(st.integers(0, 1000), min_size=n, max_size=n),
    st.booleans())))
def test_abstract_encoding_round_trip(data):
    a, p, td = data
    spec = AbstractSpec(len(a))
    s = AbstractState(tuple(a), tuple(p), td)
    assert spec.decode(spec.encode(s)) == s


def test_trace_json_round_trip():
    spec = AbstractSpec(1)
    s0 = AbstractState((True,), (0,), False)
    s1 = AbstractState((False,), (0,), False)
    tr = Trace([s0, s1], [Label("Terminate", (0,))], 1, STUTTER)
    back = Trace.from_json(spec, tr.to_json(spec))
    assert back == tr
    assert replay(spec, tr) is None


def test_replay_flags_bad_step():
    spec = AbstractSpec(1)
    s0 = AbstractState((True,), (0,), False)
    tr = Trace([s0, AbstractState((True,), (3,), False)], [Label("SendMsg", (0, 0))])
    assert replay(spec, tr) == 1
    assert replay(spec, Trace([AbstractState((True,), (1,), False)])) == 0
    assert replay(spec, Trace([AbstractState((True,), (1,), False)]), from_init=False) is None


def test_universe_matches_size():
    spec = SafraSpec(2)
    b = Bounds(K=1, C=1, Q=2)
    states = list(spec.universe(b))
    assert len(states) == spec.universe_size(b) == len(set(states)) == 4 * 4 * 4 * 9 * 20
    assert all(spec.type_ok(s) and spec.within(b, s) for s in states[:500])
