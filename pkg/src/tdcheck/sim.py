"""Seeded discrete-event execution of Safra's algorithm.

The simulator drives the global state with the spec's own transition
function, so every recorded event is a legal step by construction.  A
workload model decides how often active nodes send or terminate; token
moves are scheduled with their own weight and are the only remaining
choices once the system is quiet, which guarantees eventual detection.
"""
from __future__ import annotations

import json
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from statistics import mean

from .kernel import ConfigurationError, Label, Trace
from .safra import SafraSpec, term_detect
from .abstract import terminated

TRACE_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class SimConfig:
    n: int = 5
    seed: int = 0
    max_events: int = 100_000
    send_p: float = 0.3
    terminate_p: float = 0.2
    token_priority: float = 1.0
    initially_active_p: float = 0.5

    def __post_init__(self):
        if self.n < 1:
            raise ConfigurationError("n must be >= 1")
        if self.max_events < 1:
            raise ConfigurationError("max_events must be >= 1")
        for name in ("send_p", "terminate_p", "initially_active_p"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigurationError(f"{name} must lie in [0, 1]")
        if self.token_priority <= 0:
            raise ConfigurationError("token_priority must be positive")

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class SimTrace:
    config: SimConfig
    initial: object
    events: list = field(default_factory=list)  # (Label, post-state)
    detected_at: int | None = None
    terminated_at: int | None = None
    rounds_after_termination: int = 0

    @property
    def detected(self) -> bool:
        return self.detected_at is not None

    @property
    def states(self) -> list:
        return [self.initial] + [t for _, t in self.events]

    def to_trace(self) -> Trace:
        return Trace(self.states, [l for l, _ in self.events])

    def verdict(self) -> dict:
        return {
            "detected": self.detected,
            "detected_at": self.detected_at,
            "terminated_at": self.terminated_at,
            "rounds_after_termination": self.rounds_after_termination,
            "events": len(self.events),
        }

    def to_json(self) -> dict:
        spec = SafraSpec(self.config.n)
        return {
            "schema_version": TRACE_SCHEMA_VERSION,
            "kind": "sim-trace",
            "spec": {"spec": "safra", "n": self.config.n, "mutant": None},
            "config": self.config.to_json(),
            "initial": spec.state_to_json(self.initial),
            "events": [
                {"label": label.action, "args": list(label.args), "post": spec.state_to_json(t)}
                for label, t in self.events
            ],
            "verdict": self.verdict(),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, doc: dict) -> "SimTrace":
        if doc.get("schema_version") != TRACE_SCHEMA_VERSION:
            raise ConfigurationError(f"unsupported trace schema version {doc.get('schema_version')!r}")
        config = SimConfig(**doc["config"])
        spec = SafraSpec(config.n)
        events = [(Label(e["label"], tuple(e["args"])), spec.state_from_json(e["post"])) for e in doc["events"]]
        v = doc.get("verdict") or {}
        return cls(config, spec.state_from_json(doc["initial"]), events, v.get("detected_at"),
                   v.get("terminated_at"), v.get("rounds_after_termination", 0))


def _weight(config: SimConfig, action: str) -> float:
    if action == "SendMsg":
        return config.send_p
    if action == "Terminate":
        return config.terminate_p
    if action == "RcvMsg":
        return 1.0
    return config.token_priority


def run(config: SimConfig) -> SimTrace:
    """One seeded run, halting at detection or after ``max_events`` events."""
    spec = SafraSpec(config.n)
    rng = random.Random(config.seed)
    init = spec.sample_initial(rng)
    active = tuple(rng.random() < config.initially_active_p for _ in spec.nodes)
    s = init._replace(active=active)
    trace = SimTrace(config, s)
    if terminated(s):
        trace.terminated_at = 0
    while len(trace.events) < config.max_events:
        insts = spec.instances(s)
        weights = [_weight(config, a) for a, _ in insts]
        if not insts or sum(weights) == 0:
            break
        inst = rng.choices(insts, weights)[0]
        succ = spec.instance_successors(s, inst)
        label, s = succ[rng.randrange(len(succ))]
        trace.events.append((label, s))
        k = len(trace.events)
        if trace.terminated_at is None and terminated(s):
            trace.terminated_at = k
        elif trace.terminated_at is not None and label.action == "InitiateProbe":
            trace.rounds_after_termination += 1
        if term_detect(s):
            trace.detected_at = k
            break
    return trace


def _run_summary(config: SimConfig) -> dict:
    t = run(config)
    return {"seed": config.seed, **t.verdict()}


def run_batch(seeds_or_configs, base: SimConfig = SimConfig(), workers: int = 1) -> dict:
    """Run several simulations and aggregate their verdicts."""
    configs = [c if isinstance(c, SimConfig) else replace(base, seed=int(c)) for c in seeds_or_configs]
    if workers > 1 and len(configs) > 1:
        with ProcessPoolExecutor(workers) as pool:
            runs = list(pool.map(_run_summary, configs))
    else:
        runs = [_run_summary(c) for c in configs]
    detected = [r for r in runs if r["detected"]]
    after = [r["rounds_after_termination"] for r in runs if r["terminated_at"] is not None]
    return {
        "runs": len(runs),
        "detected": len(detected),
        "detection_rate": len(detected) / len(runs) if runs else 0.0,
        "mean_events_to_detection": mean(r["detected_at"] for r in detected) if detected else None,
        "mean_rounds_after_termination": mean(after) if after else None,
        "max_rounds_after_termination": max(after) if after else None,
        "per_run": runs,
    }
