"""Command-line front end.

Configuration can come from flags or from a file.  The file format mirrors
the TLC configuration vocabulary::

    SPECIFICATION safra
    CONSTANT N = 3
    INVARIANTS TypeOK Safe
    ACTION_INVARIANTS Quiescence
    PROPERTIES round3
    BOUNDS K = 3 C = 3 Q = 9
    MUTANT token-adopts-node-color
    SEED 42

or is a JSON object with the keys spec, n, k, c, q, invariants,
action_invariants, properties, mutant, seed, budget and workers.  Flags
given on the command line override the file.
"""
from __future__ import annotations

import argparse
import json
import re
import sys
from dataclasses import replace

from .explicit import check_leadsto, explore_graph
from .explore import ExploreConfig, explore, explore_from_inv
from .inductive import check_init, check_step, check_step_action
from .kernel import Bounds, ConfigurationError, make_spec
from .report import EXIT_CONFIG_ERROR, PASS, render
from .sim import SimConfig, run, run_batch
from .validate import validate_file

SUBCOMMANDS = ("check", "liveness", "indcheck", "refine", "explore", "simulate", "validate")

_KEYWORDS = {
    "SPECIFICATION": "spec",
    "CONSTANT": "constants",
    "CONSTANTS": "constants",
    "INVARIANT": "invariants",
    "INVARIANTS": "invariants",
    "ACTION_INVARIANT": "action_invariants",
    "ACTION_INVARIANTS": "action_invariants",
    "PROPERTY": "properties",
    "PROPERTIES": "properties",
    "BOUNDS": "constants",
    "MUTANT": "mutant",
    "SEED": "seed",
    "BUDGET": "budget",
    "WORKERS": "workers",
    "TOKEN_START": "token_start",
}
_LIST_KEYS = ("invariants", "action_invariants", "properties")
_INT_KEYS = ("n", "k", "c", "q", "seed", "budget", "workers")


def parse_config_text(text: str) -> dict:
    """Parse a TLC-style configuration file (or a JSON object)."""
    if text.lstrip().startswith("{"):
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"bad JSON config: {exc}") from None
        out = {k.lower(): v for k, v in raw.items()}
        for key in _LIST_KEYS:
            if isinstance(out.get(key), str):
                out[key] = [out[key]]
        return out

    text = re.sub(r"\(\*.*?\*\)", " ", text, flags=re.S)
    text = re.sub(r"\\\*[^\n]*", " ", text)
    tokens = re.findall(r"[^\s=,]+|=", text)
    out: dict = {}
    key, pending = None, None
    for tok in tokens:
        if tok in _KEYWORDS:
            key = _KEYWORDS[tok]
            continue
        if key is None:
            raise ConfigurationError(f"config value {tok!r} before any keyword")
        if key == "constants":
            if tok == "=":
                continue
            if pending is None:
                pending = tok.lower()
            else:
                out[pending] = _int(tok, pending)
                pending = None
        elif key in _LIST_KEYS:
            out.setdefault(key, []).append(tok)
        elif key in out:
            raise ConfigurationError(f"{key.upper()} given twice")
        else:
            out[key] = tok
    if pending is not None:
        raise ConfigurationError(f"constant {pending} has no value")
    for k in _INT_KEYS:
        if k in out and not isinstance(out[k], int):
            out[k] = _int(out[k], k)
    return out


def _int(tok, name) -> int:
    try:
        return int(tok)
    except (TypeError, ValueError):
        raise ConfigurationError(f"{name} must be an integer, got {tok!r}") from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG_ERROR)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TLC-style or JSON configuration file")
    common.add_argument("--spec", choices=("abstract", "safra"))
    common.add_argument("--n", type=int)
    common.add_argument("--k", type=int, help="bound on pending messages per node")
    common.add_argument("--c", type=int, help="bound on |counter[i]|")
    common.add_argument("--q", type=int, help="bound on |token.q|")
    common.add_argument("--max-depth", type=int)
    common.add_argument("--inv", action="append", help="state invariant (repeatable)")
    common.add_argument("--action-inv", action="append", help="action invariant (repeatable)")
    common.add_argument("--prop", action="append", help="leads-to property (repeatable)")
    common.add_argument("--mutant")
    common.add_argument("--token-start", choices=("any", "initiator"),
                        help="safra: initial token at any node (default) or at node 0")
    common.add_argument("--seed", type=int)
    common.add_argument("--budget", type=int, help="wall-clock budget in milliseconds")
    common.add_argument("--workers", type=int)
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--format", choices=("text", "json"), default="text")

    parser = _Parser(prog="tdcheck", description="Verification workbench for distributed termination detection.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("check", parents=[common], help="exhaustive BFS of invariants and leads-to properties")
    p.add_argument("--probabilistic", action="store_true", help="store 64-bit state digests instead of states")
    p.add_argument("--constraint-mode", choices=("discard", "count"), default="discard")

    p = sub.add_parser("liveness", parents=[common], help="leads-to under weak fairness")
    p.add_argument("--constraint-mode", choices=("discard", "count"), default="discard")

    for name, helptext in (("indcheck", "inductiveness checks"), ("refine", "refinement of the abstract spec")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--mode", choices=("exhaustive", "sampled"), default="exhaustive")
        p.add_argument("--samples", type=int, default=10_000)

    p = sub.add_parser("explore", parents=[common], help="randomized walks")
    p.add_argument("--walk-length", type=int, default=100)
    p.add_argument("--walkers", type=int)
    p.add_argument("--from-inv", help="start walks from states sampled out of this predicate")
    p.add_argument("--choice", choices=("action", "label"), default="action")

    p = sub.add_parser("simulate", parents=[common], help="seeded simulation of Safra's algorithm")
    p.add_argument("--runs", type=int, default=1, help="number of seeded runs (seed, seed+1, ...)")
    p.add_argument("--max-events", type=int, default=100_000)
    p.add_argument("--send-p", type=float, default=0.3)
    p.add_argument("--terminate-p", type=float, default=0.2)
    p.add_argument("--token-priority", type=float, default=1.0)
    p.add_argument("--trace-out", help="write the trace JSON of a single run here")

    p = sub.add_parser("validate", parents=[common], help="validate a recorded trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--allow-stutter", action="store_true")
    p.add_argument("--label-free", action="store_true", help="ignore labels, match any action")
    return parser


def resolve(args) -> dict:
    """Merge config-file values with command-line flags."""
    cfg: dict = {}
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = parse_config_text(fh.read())
        except OSError as exc:
            raise ConfigurationError(f"cannot read config: {exc}") from None
    flags = {
        "spec": args.spec, "n": args.n, "k": args.k, "c": args.c, "q": args.q,
        "invariants": args.inv, "action_invariants": args.action_inv, "properties": args.prop,
        "mutant": args.mutant, "token_start": args.token_start, "seed": args.seed, "budget": args.budget, "workers": args.workers,
    }
    for key, val in flags.items():
        if val is not None:
            cfg[key] = val
    unknown = set(cfg) - set(flags)
    if unknown:
        raise ConfigurationError(f"unknown config keys: {', '.join(sorted(unknown))}")
    cfg.setdefault("spec", "safra" if args.command in ("refine", "simulate") else "abstract")
    for key in _LIST_KEYS:
        cfg[key] = list(cfg.get(key) or [])
    return cfg


def _spec(cfg):
    if cfg.get("n") is None:
        raise ConfigurationError("--n (or CONSTANT N) is required")
    options = {"token_start": cfg["token_start"]} if cfg.get("token_start") else {}
    return make_spec(cfg["spec"], cfg["n"], cfg.get("mutant"), **options)


def _bounds(cfg, args) -> Bounds:
    return Bounds(cfg.get("k"), cfg.get("c"), cfg.get("q"), getattr(args, "max_depth", None))


def _first_failure(reports):
    for r in reports:
        if r.verdict != PASS:
            return r
    return None


def _combine(reports, check: str):
    """One report summarising several sub-checks (the first non-pass wins)."""
    bad = _first_failure(reports)
    props = tuple(p for r in reports for p in r.properties)
    sub = {f"{r.check}:{'/'.join(r.properties)}": r.verdict for r in reports}
    base = bad or reports[0]
    return replace(base, check=check, properties=props, stats={**base.stats, "subchecks": sub},
                   wall_time=sum(r.wall_time for r in reports))


def cmd_check(args, cfg):
    spec = _spec(cfg)
    invs = cfg["invariants"] or ([] if cfg["action_invariants"] or cfg["properties"] else ["TypeOK"])
    budget = cfg["budget"] / 1000 if cfg.get("budget") else None
    report, graph = explore_graph(spec, _bounds(cfg, args), invs, cfg["action_invariants"],
                                  workers=cfg.get("workers"), exact=not args.probabilistic,
                                  constraint_mode=args.constraint_mode, time_budget=budget, check_name="check")
    reports = [report]
    if report.verdict == PASS:
        reports += [check_leadsto(spec, graph.bounds, p, graph=graph) for p in cfg["properties"]]
    return spec, _combine(reports, "check")


def cmd_liveness(args, cfg):
    spec = _spec(cfg)
    props = cfg["properties"] or ["Live"]
    budget = cfg["budget"] / 1000 if cfg.get("budget") else None
    _, graph = explore_graph(spec, _bounds(cfg, args), workers=cfg.get("workers"),
                             constraint_mode=args.constraint_mode, time_budget=budget, check_name="liveness")
    reports = [check_leadsto(spec, graph.bounds, p, graph=graph) for p in props]
    return spec, _combine(reports, "liveness")


def _inductive_kw(args, cfg):
    return dict(mode=args.mode, samples=args.samples, seed=cfg.get("seed") or 0,
                workers=cfg.get("workers") or 1)


def cmd_indcheck(args, cfg):
    spec = _spec(cfg)
    inv = cfg["invariants"] or ["IndInv"]
    bounds = _bounds(cfg, args)
    kw = _inductive_kw(args, cfg)
    reports = [check_init(spec, inv)]
    if reports[0].verdict == PASS:
        reports.append(check_step(spec, inv, bounds, **kw))
        for a in cfg["action_invariants"]:
            reports.append(check_step_action(spec, inv, a, bounds, **kw))
    return spec, _combine(reports, "indcheck")


def cmd_refine(args, cfg):
    spec = _spec(cfg)
    if spec.name != "safra":
        raise ConfigurationError("refine needs --spec safra")
    inv = cfg["invariants"] or ["TypeOK", "Inv"]
    reports = [check_init(spec, "refinement-init")]
    if reports[0].verdict == PASS:
        reports.append(check_step_action(spec, inv, "refinement-step", _bounds(cfg, args), **_inductive_kw(args, cfg)))
    return spec, _combine(reports, "refine")


def cmd_explore(args, cfg):
    spec = _spec(cfg)
    props = cfg["invariants"] + cfg["action_invariants"] + cfg["properties"]
    if not props:
        props = (["TypeOK", "Inv", "refinement-step", "refinement-fairness"] if spec.name == "safra"
                 else ["TypeOK", "Safe", "Quiescence", "Live"])
    config = ExploreConfig(walk_length=args.walk_length, budget_ms=cfg.get("budget") or 3000,
                           walkers=args.walkers or cfg.get("workers") or 1, seed=cfg.get("seed") or 0,
                           properties=tuple(props), choice=args.choice)
    bounds = _bounds(cfg, args)
    if args.from_inv:
        return spec, explore_from_inv(spec, args.from_inv, bounds, config)
    return spec, explore(spec, bounds, config)


def cmd_simulate(args, cfg):
    if cfg["spec"] != "safra":
        raise ConfigurationError("simulate runs Safra's algorithm; use --spec safra")
    base = SimConfig(n=cfg.get("n") or 5, seed=cfg.get("seed") or 0, max_events=args.max_events,
                     send_p=args.send_p, terminate_p=args.terminate_p, token_priority=args.token_priority)
    if args.runs < 0:
        raise ConfigurationError("--runs must be >= 0")
    if args.runs == 1:
        trace = run(base)
        if args.trace_out:
            with open(args.trace_out, "w") as fh:
                fh.write(trace.dumps())
        v = trace.verdict()
        text = (f"simulate: {'DETECTED' if v['detected'] else 'NOT DETECTED'}\n"
                + "\n".join(f"  {k}: {val}" for k, val in v.items()))
        doc = {"kind": "sim-summary", "config": base.to_json(), **v}
        return text, doc, 0 if v["detected"] else 2
    if args.trace_out:
        raise ConfigurationError("--trace-out needs a single run")
    summary = run_batch(range(base.seed, base.seed + args.runs), base, workers=cfg.get("workers") or 1)
    text = "simulate batch:\n" + "\n".join(f"  {k}: {v}" for k, v in summary.items() if k != "per_run")
    ok = summary["runs"] == summary["detected"]
    return text, {"kind": "sim-batch", "config": base.to_json(), **summary}, 0 if ok else 2


def cmd_validate(args, cfg):
    spec, verdict = validate_file(args.trace, args.allow_stutter, args.label_free)
    return verdict.render_text(), verdict.to_json(spec), verdict.exit_code


_CHECKS = {"check": cmd_check, "liveness": cmd_liveness, "indcheck": cmd_indcheck,
           "refine": cmd_refine, "explore": cmd_explore}


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG_ERROR
    try:
        cfg = resolve(args)
        if args.command in _CHECKS:
            spec, report = _CHECKS[args.command](args, cfg)
            _emit(render(report, spec, args.format), args.out)
            return report.exit_code
        handler = cmd_simulate if args.command == "simulate" else cmd_validate
        text, doc, code = handler(args, cfg)
        _emit(json.dumps(doc, indent=2) if args.format == "json" else text, args.out)
        return code
    except ConfigurationError as exc:
        print(f"tdcheck: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
