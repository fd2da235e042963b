"""One-step checks over candidate invariants, without a solver.

``check_init`` verifies that every initial state satisfies a candidate
invariant.  ``check_step`` verifies that every state satisfying it (inside
the bounds) only has successors satisfying it, either by enumerating the
bounded type-correct universe or by uniform sampling with rejection.
``check_step_action`` does the same for an action invariant.
"""
from __future__ import annotations

import random
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .kernel import Bounds, ConfigurationError, Spec, Trace, spec_from_params
from .report import INCONCLUSIVE, PASS, VIOLATION, CheckReport

PROBE_BATCH = 10_000
MIN_ACCEPTANCE = 0.001


def conjunction(spec: Spec, names):
    """A predicate for the conjunction of registered state predicates.

    ``names`` may be a single name, a ``&``-joined string, or a sequence.
    """
    if isinstance(names, str):
        names = [n.strip() for n in names.split("&")]
    preds = [spec.state_predicate(n) for n in names]
    if len(preds) == 1:
        return preds[0]
    return lambda s: all(p(s) for p in preds)


def _name(names) -> str:
    if isinstance(names, str):
        return names
    if callable(names):
        return names.__name__
    return " & ".join(n if isinstance(n, str) else n.__name__ for n in names)


def worker_rngs(seed: int, workers: int) -> list[random.Random]:
    """Independent, reproducible RNG streams for (seed, worker-index)."""
    children = np.random.SeedSequence(seed).spawn(workers)
    return [random.Random(int(c.generate_state(1, np.uint64)[0])) for c in children]


def check_init(spec: Spec, inv="IndInv") -> CheckReport:
    """Every initial state satisfies ``inv``."""
    pred = conjunction(spec, inv)
    start = time.perf_counter()
    count = 0
    for s in spec.initial_states():
        count += 1
        if not pred(s):
            return CheckReport(
                VIOLATION, "check_init", spec.params, distinct_states=count,
                violated_property=_name(inv), counterexample=Trace([s]),
                wall_time=time.perf_counter() - start, properties=(_name(inv),),
                message="initial state violates the candidate invariant",
            )
    return CheckReport(
        PASS, "check_init", spec.params, distinct_states=count,
        wall_time=time.perf_counter() - start, properties=(_name(inv),),
    )


def _sample_inv_states(spec, bounds, pred, rng, samples):
    """Yield up to ``samples`` uniformly drawn states satisfying ``pred``.

    Stops early (returning normally) when a probe batch shows that fewer
    than 0.1% of draws satisfy the predicate; the caller sees the shortfall.
    """
    domains = spec.domains(bounds)
    assemble = spec.assemble
    choice = rng.choice
    accepted = drawn = batch_acc = batch = 0
    while accepted < samples:
        s = assemble(tuple(choice(d) for d in domains))
        drawn += 1
        batch += 1
        if pred(s):
            accepted += 1
            batch_acc += 1
            yield s
        if batch == PROBE_BATCH:
            if batch_acc < MIN_ACCEPTANCE * PROBE_BATCH:
                return
            batch = batch_acc = 0


def _step_scan(spec: Spec, bounds: Bounds, inv, step, kind, mode, samples, rng):
    """Scan inv-states; return (checked, violating step or None)."""
    pred = conjunction(spec, inv)
    if step is None:
        check = pred
    elif kind == "action":
        check = spec.action_predicate(step)
    else:
        check = conjunction(spec, step)
    if mode == "exhaustive":
        source = (s for s in spec.universe(bounds) if pred(s))
    else:
        source = _sample_inv_states(spec, bounds, pred, rng, samples)
    checked = 0
    for s in source:
        checked += 1
        for label, t in spec.successors(s):
            ok = check(s, t) if kind == "action" else check(t)
            if not ok:
                return checked, Trace([s, t], [label])
    return checked, None


def _scan_worker(params, bounds, inv, step, kind, samples, seed, worker, workers):
    spec = spec_from_params(params)
    rng = worker_rngs(seed, workers)[worker]
    checked, trace = _step_scan(spec, bounds, inv, step, kind, "sampled", samples, rng)
    return checked, None if trace is None else trace.to_json(spec)


def check_step(
    spec: Spec,
    inv="IndInv",
    bounds: Bounds = Bounds(),
    mode: str = "exhaustive",
    samples: int = 10_000,
    seed: int = 0,
    *,
    step=None,
    step_kind: str | None = None,
    workers: int = 1,
) -> CheckReport:
    """Every successor of a bounded ``inv``-state satisfies ``step``.

    ``step`` defaults to ``inv`` itself (inductiveness).  It may name a
    state predicate or an action predicate.  Successors are not required to
    stay inside the bounds.
    """
    if mode not in ("exhaustive", "sampled"):
        raise ConfigurationError("mode must be 'exhaustive' or 'sampled'")
    if mode == "sampled" and samples < 1:
        raise ConfigurationError("sampled mode needs samples >= 1")
    spec.domains(bounds)  # validates that the bounds are finite
    target = _name(inv) if step is None else _name(step)
    if step_kind is None:
        step_kind = "action" if isinstance(step, str) and step in spec.action_predicates else "state"
    check = "check_step_action" if step_kind == "action" else "check_step"
    start = time.perf_counter()
    if mode == "sampled" and workers > 1 and all(isinstance(x, str) for x in (inv, step or "")):
        per = [samples // workers + (1 if w < samples % workers else 0) for w in range(workers)]
        with ProcessPoolExecutor(workers) as pool:
            futs = [pool.submit(_scan_worker, spec.params, bounds, inv, step, step_kind, per[w], seed, w, workers)
                    for w in range(workers)]
            results = [f.result() for f in futs]
        checked = sum(c for c, _ in results)
        trace = next((Trace.from_json(spec, t) for _, t in results if t is not None), None)
    else:
        rng = worker_rngs(seed, 1)[0]
        checked, trace = _step_scan(spec, bounds, inv, step, step_kind, mode, samples, rng)

    stats = {"mode": mode, "inv_states_checked": checked, "bounds": bounds.to_json()}
    if mode == "sampled":
        stats.update(samples=samples, seed=seed, workers=workers)
    common = dict(check=check, spec=spec.params, distinct_states=checked,
                  properties=(target,), stats=stats)
    elapsed = time.perf_counter() - start
    if trace is not None:
        return CheckReport(VIOLATION, violated_property=target, counterexample=trace,
                           wall_time=elapsed, message=f"step from a {_name(inv)} state breaks {target}",
                           **common)
    if mode == "sampled" and checked < samples:
        return CheckReport(INCONCLUSIVE, wall_time=elapsed,
                           message=f"{_name(inv)} is too sparse to sample (acceptance below 0.1%)", **common)
    if mode == "exhaustive" and checked == 0:
        return CheckReport(INCONCLUSIVE, wall_time=elapsed,
                           message=f"no bounded state satisfies {_name(inv)}", **common)
    return CheckReport(PASS, wall_time=elapsed, **common)


def check_step_action(spec: Spec, inv="IndInv", action_inv="Quiescence", bounds: Bounds = Bounds(),
                      mode: str = "exhaustive", samples: int = 10_000, seed: int = 0, **kw) -> CheckReport:
    """Every edge leaving a bounded ``inv``-state satisfies ``action_inv``."""
    spec.action_predicate(action_inv)
    return check_step(spec, inv, bounds, mode, samples, seed, step=action_inv, step_kind="action", **kw)


def sample_states(spec: Spec, inv, bounds: Bounds, count: int, rng: random.Random) -> list:
    """Draw up to ``count`` states satisfying ``inv`` (fewer if too sparse)."""
    return list(_sample_inv_states(spec, bounds, conjunction(spec, inv), rng, count))
