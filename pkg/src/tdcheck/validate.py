"""Replay recorded traces against a spec, acting as a runtime monitor.

Indices refer to positions in the state sequence: 0 is the initial state
and k is the state after the k-th event.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from .kernel import STUTTER, Label, Spec, Trace, spec_from_params

BAD_INITIAL = "bad-initial-state"
NOT_ENABLED = "label-not-enabled"
MISMATCH = "post-state-mismatch"
TYPE_ERROR = "type-error"
REASONS = (BAD_INITIAL, NOT_ENABLED, MISMATCH, TYPE_ERROR)
VERDICT_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ValidationVerdict:
    accepted: bool
    failing_index: int | None = None
    reason: str | None = None
    expected_successors: list = field(default_factory=list)
    message: str = ""
    checked: int = 0

    def __post_init__(self):
        if self.accepted != (self.failing_index is None):
            raise ValueError("accepted must hold exactly when failing_index is None")
        if self.reason is not None and self.reason not in REASONS:
            raise ValueError(f"unknown reason {self.reason!r}")

    @property
    def exit_code(self) -> int:
        return 0 if self.accepted else 1

    def to_json(self, spec: Spec | None = None) -> dict:
        expected = self.expected_successors
        if spec is not None:
            expected = [{"label": str(l), "post": spec.state_to_json(t)} for l, t in expected]
        else:
            expected = [{"label": str(l), "post": repr(t)} for l, t in expected]
        return {
            "schema_version": VERDICT_SCHEMA_VERSION,
            "kind": "validation-verdict",
            "accepted": self.accepted,
            "failing_index": self.failing_index,
            "reason": self.reason,
            "message": self.message,
            "states_checked": self.checked,
            "expected_successors": expected,
        }

    def render_text(self) -> str:
        if self.accepted:
            return f"validate: ACCEPTED ({self.checked} states)"
        lines = [f"validate: REJECTED at index {self.failing_index} ({self.reason})"]
        if self.message:
            lines.append(f"  {self.message}")
        for label, t in self.expected_successors:
            lines.append(f"  expected {label} -> {t}")
        return "\n".join(lines)


def _reject(idx, reason, message, expected=()):
    return ValidationVerdict(False, idx, reason, list(expected), message, idx)


def _check_initial(spec: Spec, s) -> ValidationVerdict | None:
    if not spec.type_ok(s):
        return _reject(0, TYPE_ERROR, "initial state is not type-correct")
    if not spec.is_initial(s):
        return _reject(0, BAD_INITIAL, "initial state does not satisfy Init")
    return None


def validate(spec: Spec, trace, allow_stutter: bool = False) -> ValidationVerdict:
    """Check a labelled trace step by step.

    ``trace`` is a kernel Trace, a SimTrace, or a parsed trace JSON document.
    """
    if isinstance(trace, dict):
        return validate_json(spec, trace, allow_stutter)
    if hasattr(trace, "to_trace"):
        trace = trace.to_trace()
    states, labels = trace.states, trace.labels
    bad = _check_initial(spec, states[0])
    if bad:
        return bad
    for k, label in enumerate(labels, start=1):
        s, t = states[k - 1], states[k]
        if not spec.type_ok(t):
            return _reject(k, TYPE_ERROR, "post-state is not type-correct")
        if label == STUTTER or getattr(label, "action", None) == STUTTER:
            if allow_stutter and s == t:
                continue
            return _reject(k, NOT_ENABLED, "stutter step not allowed here")
        try:
            spec.check_label(label)
        except Exception as exc:
            return _reject(k, TYPE_ERROR, f"bad label {label}: {exc}")
        succ = spec.successors_for(label, s)
        if not succ:
            if allow_stutter and s == t:
                continue
            return _reject(k, NOT_ENABLED, f"{label} is not enabled")
        if t not in succ:
            return _reject(k, MISMATCH, f"post-state of {label} differs from every spec successor",
                           [(label, u) for u in succ])
    return ValidationVerdict(True, checked=len(states))


def validate_label_free(spec: Spec, states) -> ValidationVerdict:
    """Each consecutive pair must be a stutter or some labelled step."""
    states = list(states)
    if not states:
        return _reject(0, TYPE_ERROR, "empty state sequence")
    bad = _check_initial(spec, states[0])
    if bad:
        return bad
    for k in range(1, len(states)):
        s, t = states[k - 1], states[k]
        if not spec.type_ok(t):
            return _reject(k, TYPE_ERROR, "state is not type-correct")
        if s == t:
            continue
        succ = spec.successors(s)
        if not any(u == t for _, u in succ):
            return _reject(k, MISMATCH, "no single action relates this pair of states", succ)
    return ValidationVerdict(True, checked=len(states))


def parse_trace(spec: Spec, doc: dict):
    """Decode a trace document; returns (Trace, None) or (None, verdict)."""
    try:
        s0 = spec.state_from_json(doc["initial"])
    except Exception as exc:
        return None, _reject(0, TYPE_ERROR, f"malformed initial state: {exc}")
    states, labels = [s0], []
    events = doc.get("events")
    if not isinstance(events, list):
        return None, _reject(0, TYPE_ERROR, "events must be a list")
    for k, e in enumerate(events, start=1):
        try:
            labels.append(Label(e["label"], tuple(e.get("args", ()))))
            states.append(spec.state_from_json(e["post"]))
        except Exception as exc:
            return None, _reject(k, TYPE_ERROR, f"malformed event: {exc}")
    return Trace(states, labels), None


def validate_json(spec: Spec, doc: dict, allow_stutter: bool = False) -> ValidationVerdict:
    trace, bad = parse_trace(spec, doc)
    return bad if bad else validate(spec, trace, allow_stutter)


def spec_for(doc: dict) -> Spec:
    info = doc.get("spec") or {"spec": "safra", "n": doc["config"]["n"], "mutant": None}
    return spec_from_params(info)


def validate_file(path, allow_stutter: bool = False, label_free: bool = False):
    """Load a trace file and validate it; returns (spec or None, verdict)."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
        spec = spec_for(doc)
    except Exception as exc:
        return None, _reject(0, TYPE_ERROR, f"cannot read trace: {exc}")
    if label_free:
        trace, bad = parse_trace(spec, doc)
        return spec, bad if bad else validate_label_free(spec, trace.states)
    return spec, validate_json(spec, doc, allow_stutter)
