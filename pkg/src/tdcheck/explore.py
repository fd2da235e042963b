"""Randomized state exploration.

Random walks start from a uniformly drawn initial state (or from a state
sampled out of a candidate invariant) and repeatedly take a random enabled
transition, checking state invariants, action invariants and leads-to
properties along the way.  A leads-to property is checked on every lasso
the walk closes: either a revisited state (a cycle) or a state at which all
fair actions are disabled (stuttering forever is then a fair behavior).

Exploration has no notion of coverage, so a run without findings is
reported as inconclusive.
"""
from __future__ import annotations

import multiprocessing as mp
import random
import time
from dataclasses import dataclass, field

from .inductive import conjunction, worker_rngs, _sample_inv_states
from .kernel import STUTTER, Bounds, ConfigurationError, Spec, Trace, spec_from_params
from .report import INCONCLUSIVE, PASS, VIOLATION, CheckReport

CHOICE_RULES = ("action", "label")


@dataclass(frozen=True)
class ExploreConfig:
    walk_length: int = 100
    budget_ms: int = 3000
    walkers: int = 1
    seed: int = 0
    properties: tuple = ()
    # "action": pick an enabled action instance (action name and its first
    # node argument) uniformly, then one of its in-bounds successors uniformly.
    # "label": uniform over all labelled successors.
    choice: str = "action"
    max_walks: int | None = None

    def __post_init__(self):
        if self.walk_length < 1:
            raise ConfigurationError("walk_length must be >= 1")
        if self.budget_ms < 1:
            raise ConfigurationError("budget_ms must be >= 1")
        if self.walkers < 1:
            raise ConfigurationError("walkers must be >= 1")
        if self.choice not in CHOICE_RULES:
            raise ConfigurationError(f"choice must be one of {CHOICE_RULES}")


@dataclass
class WalkResult:
    trace: Trace
    violated: str | None = None
    deadlock: bool = False
    lassos: int = 0
    extra: dict = field(default_factory=dict)


class _Props:
    """Resolved property names, split by kind."""

    def __init__(self, spec: Spec, names):
        self.state, self.action, self.leadsto = [], [], []
        for name in names:
            kind = spec.property_kind(name)
            if kind == "state":
                self.state.append((name, spec.state_predicate(name)))
            elif kind == "action":
                self.action.append((name, spec.action_predicate(name)))
            else:
                self.leadsto.append(spec.leadsto(name))


class _LassoMonitor:
    """Tracks P / Q occurrences along a walk for one leads-to property."""

    def __init__(self, lt):
        self.lt = lt
        self.last_p = -1
        self.last_q = -1
        self.disabled: list[tuple] = []

    def visit(self, idx: int, s, enabled_actions: set) -> None:
        lt = self.lt
        if lt.q(s):
            self.last_q = idx
        elif lt.p(s):
            self.last_p = idx
        self.disabled.append(tuple(not (f.actions & enabled_actions) for f in lt.fairness))

    def stutter_violation(self, idx: int) -> bool:
        return self.last_p > self.last_q and self.last_q < idx and all(self.disabled[idx])

    def cycle_violation(self, k: int, m: int, labels: list, loop_label) -> bool:
        """The cycle states[k..m] closed by ``loop_label`` back to k."""
        if self.last_q >= k or self.last_p <= self.last_q:
            return False
        cyc = labels[k:m] + [loop_label]
        for fi, f in enumerate(self.lt.fairness):
            if not (any(f.covers(l) for l in cyc) or any(self.disabled[i][fi] for i in range(k, m + 1))):
                return False
        return True


def _step(spec: Spec, bounds: Bounds, rng: random.Random, s, choice: str):
    """Enabled action names at ``s`` and a random in-bounds step (or None)."""
    if choice == "label":
        succ = spec.successors(s)
        names = {l.action for l, _ in succ}
        if not bounds.unbounded:
            succ = [(l, t) for l, t in succ if spec.within(bounds, t)]
        return names, (succ[rng.randrange(len(succ))] if succ else None)
    insts = spec.instances(s)
    names = {a for a, _ in insts}
    while insts:
        k = rng.randrange(len(insts))
        succ = spec.instance_successors(s, insts[k])
        if not bounds.unbounded:
            succ = [(l, t) for l, t in succ if spec.within(bounds, t)]
        if succ:
            return names, succ[rng.randrange(len(succ))]
        insts.pop(k)
    return names, None


def walk(spec: Spec, bounds: Bounds, rng: random.Random, walk_length: int, props: _Props,
         start=None, choice: str = "action") -> WalkResult:
    s = spec.sample_initial(rng) if start is None else start
    states, labels = [s], []
    monitors = [_LassoMonitor(lt) for lt in props.leadsto]
    seen = {s: 0} if monitors else None
    lassos = 0

    for name, f in props.state:
        if not f(s):
            return WalkResult(Trace(states, labels), name)
    while True:
        m = len(states) - 1
        names, picked = _step(spec, bounds, rng, s, choice)
        for mon in monitors:
            mon.visit(m, s, names)
            if mon.stutter_violation(m):
                return WalkResult(Trace(states, labels, m, STUTTER), mon.lt.name, lassos=lassos + 1)
        if len(states) >= walk_length:
            return WalkResult(Trace(states, labels), lassos=lassos)
        if picked is None:
            return WalkResult(Trace(states, labels), deadlock=True, lassos=lassos)
        label, t = picked
        for name, f in props.action:
            if not f(s, t):
                return WalkResult(Trace(states + [t], labels + [label]), name, lassos=lassos)
        if seen is not None:
            k = seen.get(t)
            if k is not None:
                lassos += 1
                for mon in monitors:
                    if mon.cycle_violation(k, m, labels, label):
                        return WalkResult(Trace(list(states), list(labels), k, label), mon.lt.name, lassos=lassos)
            seen[t] = m + 1
        states.append(t)
        labels.append(label)
        s = t
        for name, f in props.state:
            if not f(s):
                return WalkResult(Trace(states, labels), name, lassos=lassos)


def random_walk(spec: Spec, bounds: Bounds = Bounds(), seed: int = 0, walk_length: int = 100,
                properties=(), choice: str = "action", start=None) -> CheckReport:
    """One seeded random walk.  A violation returns the whole walk."""
    if walk_length < 1:
        raise ConfigurationError("walk_length must be >= 1")
    props = _Props(spec, properties)
    t0 = time.perf_counter()
    res = walk(spec, bounds, worker_rngs(seed, 1)[0], walk_length, props, start, choice)
    return CheckReport(
        VIOLATION if res.violated else PASS, "random_walk", spec.params,
        distinct_states=len(set(res.trace.states)), diameter=len(res.trace) - 1,
        violated_property=res.violated, counterexample=res.trace if res.violated else None,
        wall_time=time.perf_counter() - t0, soundness="random", properties=tuple(properties),
        stats={"seed": seed, "steps": len(res.trace) - 1, "deadlock": res.deadlock,
               "lassos": res.lassos, "walk": res.trace.to_json(spec)},
    )


def _walker_loop(params, bounds, config, worker, inv, deadline, stop=None):
    spec = spec_from_params(params)
    props = _Props(spec, config.properties)
    rng = worker_rngs(config.seed, config.walkers)[worker]
    pred = conjunction(spec, inv) if inv is not None else None
    walks = steps = violations = 0
    first = None
    while time.perf_counter() < deadline and (stop is None or not stop.is_set()):
        if config.max_walks is not None and walks >= config.max_walks:
            break
        start = None
        if pred is not None:
            drawn = list(_sample_inv_states(spec, bounds, pred, rng, 1))
            if not drawn:
                return {"walks": walks, "steps": steps, "violations": 0, "first": None, "sparse": True}
            start = drawn[0]
        res = walk(spec, bounds, rng, config.walk_length, props, start, config.choice)
        walks += 1
        steps += len(res.trace) - 1
        if res.violated:
            violations += 1
            first = (res.violated, res.trace.to_json(spec), walks)
            if stop is not None:
                stop.set()
            break
    return {"walks": walks, "steps": steps, "violations": violations, "first": first, "sparse": False}


def _proc_main(params, bounds, config, worker, inv, deadline, stop, queue):
    queue.put((worker, _walker_loop(params, bounds, config, worker, inv, deadline, stop)))


def _run(spec: Spec, bounds: Bounds, config: ExploreConfig, inv, check: str) -> CheckReport:
    _Props(spec, config.properties)  # validate names before spawning anything
    t0 = time.perf_counter()
    deadline = t0 + config.budget_ms / 1000
    if config.walkers == 1:
        results = [_walker_loop(spec.params, bounds, config, 0, inv, deadline)]
    else:
        ctx = mp.get_context()
        stop, queue = ctx.Event(), ctx.Queue()
        procs = [ctx.Process(target=_proc_main, args=(spec.params, bounds, config, w, inv, deadline, stop, queue))
                 for w in range(config.walkers)]
        for p in procs:
            p.start()
        by_worker = dict(queue.get() for _ in procs)
        for p in procs:
            p.join()
        results = [by_worker[w] for w in range(config.walkers)]

    walks = sum(r["walks"] for r in results)
    steps = sum(r["steps"] for r in results)
    violations = sum(r["violations"] for r in results)
    stats = {
        "walks": walks, "steps": steps, "violations": violations,
        "violation_rate": violations / walks if walks else 0.0,
        "seed": config.seed, "walkers": config.walkers, "walk_length": config.walk_length,
        "budget_ms": config.budget_ms, "choice": config.choice,
    }
    common = dict(check=check, spec=spec.params, distinct_states=steps + walks, soundness="random",
                  properties=tuple(config.properties), stats=stats, wall_time=time.perf_counter() - t0)
    found = next((r["first"] for r in results if r["first"] is not None), None)
    if found is not None:
        prop, trace, _ = found
        return CheckReport(VIOLATION, violated_property=prop, counterexample=Trace.from_json(spec, trace),
                           diameter=len(trace["states"]) - 1, **common)
    if any(r["sparse"] for r in results):
        return CheckReport(INCONCLUSIVE, message=f"{inv} is too sparse to sample start states", **common)
    return CheckReport(
        INCONCLUSIVE,
        message="no violation found; random exploration gives no state-space coverage guarantee",
        **common,
    )


def explore(spec: Spec, bounds: Bounds = Bounds(), config: ExploreConfig = ExploreConfig()) -> CheckReport:
    """Random walks from the initial states until a violation or the budget runs out."""
    return _run(spec, bounds, config, None, "explore")


def explore_from_inv(spec: Spec, inv, bounds: Bounds, config: ExploreConfig = ExploreConfig()) -> CheckReport:
    """Random walks starting from states sampled out of ``inv`` (needs finite bounds)."""
    spec.domains(bounds)
    return _run(spec, bounds, config, inv, "explore_from_inv")
