"""Check reports and their text / JSON rendering."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

from .kernel import STUTTER, Spec, Trace

REPORT_SCHEMA_VERSION = 1

PASS = "pass"
VIOLATION = "violation"
INCONCLUSIVE = "inconclusive"

EXIT_CODES = {PASS: 0, VIOLATION: 1, INCONCLUSIVE: 2}
EXIT_CONFIG_ERROR = 3


@dataclass(frozen=True)
class CheckReport:
    verdict: str
    check: str
    spec: dict
    distinct_states: int = 0
    diameter: int = 0
    violated_property: str | None = None
    counterexample: Trace | None = None
    wall_time: float = 0.0
    soundness: str = "exact"
    properties: tuple = ()
    stats: dict = field(default_factory=dict)
    message: str = ""

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.verdict]

    def to_json(self, spec: Spec) -> dict:
        out: dict[str, Any] = {
            "schema_version": REPORT_SCHEMA_VERSION,
            "kind": "check-report",
            "check": self.check,
            "spec": dict(self.spec),
            "verdict": self.verdict,
            "properties": list(self.properties),
            "distinct_states": self.distinct_states,
            "diameter": self.diameter,
            "violated_property": self.violated_property,
            "wall_time": round(self.wall_time, 6),
            "soundness": self.soundness,
            "stats": _jsonable(self.stats),
            "message": self.message,
            "counterexample": None,
        }
        if self.counterexample is not None:
            out["counterexample"] = self.counterexample.to_json(spec)
        return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (str, int, float, bool)) or obj is None:
        return obj
    return str(obj)


def _diff(spec: Spec, before, after) -> list[str]:
    a, b = spec.state_to_json(before), spec.state_to_json(after)
    changes = []
    for key in b:
        if a[key] == b[key]:
            continue
        if isinstance(b[key], list):
            for i, (x, y) in enumerate(zip(a[key], b[key])):
                if x != y:
                    changes.append(f"{key}[{i}]: {x} -> {y}")
        elif isinstance(b[key], dict):
            for k in b[key]:
                if a[key][k] != b[key][k]:
                    changes.append(f"{key}.{k}: {a[key][k]} -> {b[key][k]}")
        else:
            changes.append(f"{key}: {a[key]} -> {b[key]}")
    return changes


def render_trace(spec: Spec, trace: Trace) -> list[str]:
    lines = [f"  0  <Initial>  {trace.states[0]}"]
    for k, label in enumerate(trace.labels, start=1):
        if trace.is_lasso and k - 1 == trace.loop_start:
            lines.append("  cycle:")
        changes = _diff(spec, trace.states[k - 1], trace.states[k]) or ["(no change)"]
        lines.append(f"  {k:<2} {label}  " + "; ".join(changes))
    if trace.is_lasso:
        if trace.loop_start == len(trace.states) - 1:
            lines.append("  cycle:")
        if trace.loop_label == STUTTER:
            lines.append(f"  -> stutters forever at state {trace.loop_start}")
        else:
            lines.append(f"  -> {trace.loop_label} returns to state {trace.loop_start}")
    return lines


def render_text(report: CheckReport, spec: Spec) -> str:
    head = f"{report.check}: {report.verdict.upper()}"
    if report.violated_property:
        head += f" ({report.violated_property} violated)"
    lines = [head]
    if report.message:
        lines.append(f"  {report.message}")
    lines.append(
        f"  distinct states: {report.distinct_states}  diameter: {report.diameter}  "
        f"time: {report.wall_time:.2f}s  mode: {report.soundness}"
    )
    for k, v in report.stats.items():
        lines.append(f"  {k}: {v}")
    if report.counterexample is not None:
        lines.append("counterexample:")
        lines.extend(render_trace(spec, report.counterexample))
    return "\n".join(lines)


def render(report, spec: Spec, fmt: str = "text") -> str:
    """Render a CheckReport or anything else exposing to_json/render_text."""
    if fmt == "json":
        return json.dumps(report.to_json(spec), indent=2)
    if hasattr(report, "render_text"):
        return report.render_text()
    return render_text(report, spec)
