"""Exhaustive explicit-state checking.

Breadth-first reachability under a state constraint, state and action
invariants with shortest counterexamples, and ``P ~> Q`` under weak
fairness via strongly connected components of the bounded graph.

State-constraint convention: successors outside the bounds are discarded
(neither stored, counted, nor checked).  This reproduces the published
state counts (4,097 for N=4, K=3).  ``constraint_mode="count"`` instead
stores and checks such states but never expands them.
"""
from __future__ import annotations

import logging
import os
import time
from array import array
from bisect import bisect_right
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from hashlib import blake2b

from .kernel import STUTTER, Bounds, ConfigurationError, LeadsTo, Spec, Trace, spec_from_params
from .report import INCONCLUSIVE, PASS, VIOLATION, CheckReport

log = logging.getLogger(__name__)

CONSTRAINT_MODES = ("discard", "count")


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("TDCHECK_WORKERS", "1")))
    except ValueError:
        return 1


def _digest(data: bytes) -> int:
    return int.from_bytes(blake2b(data, digest_size=8).digest(), "little")


@dataclass
class StateGraph:
    """The states found by a BFS, numbered in discovery (level) order.

    In exact mode the keys are full canonical encodings, so a state can be
    decoded from its index.  In digest mode only 64-bit digests are kept and
    states are rebuilt by replaying labels from the stored initial states.
    """

    spec: Spec
    bounds: Bounds
    exact: bool = True
    constraint_mode: str = "discard"
    index: dict = field(default_factory=dict)
    keys: list = field(default_factory=list)
    parent: array = field(default_factory=lambda: array("q"))
    label_id: array = field(default_factory=lambda: array("i"))
    labels: list = field(default_factory=list)
    level_starts: list = field(default_factory=list)
    unexpanded: set = field(default_factory=set)
    roots: dict = field(default_factory=dict)
    complete: bool = False
    _label_ids: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.keys)

    @property
    def diameter(self) -> int:
        return max(len(self.level_starts) - 1, 0)

    def key(self, s):
        enc = self.spec.encode(s)
        return enc if self.exact else _digest(enc)

    def lookup(self, s) -> int | None:
        return self.index.get(self.key(s))

    def depth(self, idx: int) -> int:
        return bisect_right(self.level_starts, idx) - 1

    def _add(self, key, parent: int, label) -> int:
        idx = len(self.keys)
        self.index[key] = idx
        self.keys.append(key)
        self.parent.append(parent)
        if label is None:
            self.label_id.append(-1)
        else:
            lid = self._label_ids.get(label)
            if lid is None:
                lid = self._label_ids[label] = len(self.labels)
                self.labels.append(label)
            self.label_id.append(lid)
        return idx

    def state(self, idx: int):
        if self.exact:
            return self.spec.decode(self.keys[idx])
        return self.path(idx).states[-1]

    def path(self, idx: int) -> Trace:
        """Shortest trace (in BFS tree) from an initial state to ``idx``."""
        chain = []
        while idx >= 0:
            chain.append(idx)
            idx = self.parent[idx]
        chain.reverse()
        labels = [self.labels[self.label_id[i]] for i in chain[1:]]
        if self.exact:
            states = [self.spec.decode(self.keys[i]) for i in chain]
        else:
            states = [self.roots[chain[0]]]
            for i, label in zip(chain[1:], labels):
                want = self.keys[i]
                states.append(next(
                    t for t in self.spec.successors_for(label, states[-1])
                    if _digest(self.spec.encode(t)) == want
                ))
        return Trace(states, labels)

    def states(self):
        """Iterate (index, state) over every stored state."""
        if self.exact:
            decode = self.spec.decode
            for i, k in enumerate(self.keys):
                yield i, decode(k)
        else:
            for i in range(len(self.keys)):
                yield i, self.state(i)

    def where(self, pred) -> list[int]:
        return [i for i, s in self.states() if pred(s)]


class _Violation(Exception):
    def __init__(self, prop: str, trace: Trace):
        super().__init__(prop)
        self.prop = prop
        self.trace = trace


def _expand_chunk(params: dict, bounds: Bounds, count_out: bool, invs: list, ainvs: list, chunk: list):
    """Worker side of a parallel BFS level: expand each encoded state.

    Returns, per source, a list of ``(label, encoding, in_bounds,
    failed_action_invariant, failed_state_invariant)``.
    """
    spec = spec_from_params(params)
    sinv = [(n, spec.state_predicate(n)) for n in invs]
    ainv = [(n, spec.action_predicate(n)) for n in ainvs]
    out = []
    for enc in chunk:
        s = spec.decode(enc)
        recs = []
        for label, t in spec.successors(s):
            inside = spec.within(bounds, t)
            if not inside and not count_out:
                recs.append((label, None, False, None, None))
                continue
            bad_a = next((n for n, f in ainv if not f(s, t)), None)
            bad_s = next((n for n, f in sinv if not f(t)), None)
            recs.append((label, spec.encode(t), inside, bad_a, bad_s))
        out.append(recs)
    return out


def explore_graph(
    spec: Spec,
    bounds: Bounds = Bounds(),
    invariants=(),
    action_invariants=(),
    *,
    workers: int | None = None,
    exact: bool = True,
    constraint_mode: str = "discard",
    max_states: int | None = None,
    time_budget: float | None = None,
    check_name: str = "bfs",
) -> tuple[CheckReport, StateGraph]:
    """Breadth-first exploration; returns the report and the state graph."""
    if constraint_mode not in CONSTRAINT_MODES:
        raise ConfigurationError(f"constraint_mode must be one of {CONSTRAINT_MODES}")
    if bounds.unbounded and max_states is None and bounds.max_depth is None:
        log.warning("exploring %s without bounds; the state space may be infinite", spec)
    workers = workers or default_workers()
    sinv = [(n if isinstance(n, str) else n.__name__, spec.state_predicate(n)) for n in invariants]
    ainv = [(n if isinstance(n, str) else n.__name__, spec.action_predicate(n)) for n in action_invariants]
    if workers > 1 and any(not isinstance(n, str) for n in (*invariants, *action_invariants)):
        raise ConfigurationError("parallel exploration needs registered predicate names")
    count_out = constraint_mode == "count"
    props = tuple(n for n, _ in sinv) + tuple(n for n, _ in ainv)

    g = StateGraph(spec, bounds, exact=exact, constraint_mode=constraint_mode)
    start = time.perf_counter()
    stats = {"generated": 0, "out_of_bounds": 0, "workers": workers}

    def finish(verdict, prop=None, trace=None, message=""):
        return CheckReport(
            verdict=verdict, check=check_name, spec=spec.params,
            distinct_states=len(g), diameter=g.diameter, violated_property=prop,
            counterexample=trace, wall_time=time.perf_counter() - start,
            soundness="exact" if exact else "probabilistic", properties=props,
            stats={**stats, "bounds": bounds.to_json(), "constraint_mode": constraint_mode},
            message=message,
        ), g

    def state_violation(idx, s):
        for name, f in sinv:
            if not f(s):
                raise _Violation(name, g.path(idx) if exact else _path_with(g, idx, s))

    encode, within, successors = spec.encode, spec.within, spec.successors
    g.level_starts.append(0)
    frontier = []
    try:
        for s in spec.initial_states():
            key = g.key(s)
            if key in g.index:
                continue
            idx = g._add(key, -1, None)
            g.roots[idx] = s
            state_violation(idx, s)
            if within(bounds, s):
                frontier.append((idx, s))
            else:
                g.unexpanded.add(idx)

        depth = 0
        pool = ProcessPoolExecutor(workers) if workers > 1 else None
        try:
            while frontier:
                if bounds.max_depth is not None and depth >= bounds.max_depth:
                    g.unexpanded.update(i for i, _ in frontier)
                    return finish(INCONCLUSIVE, message=f"depth bound {bounds.max_depth} reached")
                g.level_starts.append(len(g))
                nxt = []
                if pool is None:
                    for idx, s in frontier:
                        for label, t in successors(s):
                            stats["generated"] += 1
                            inside = within(bounds, t)
                            if not inside:
                                stats["out_of_bounds"] += 1
                                if not count_out:
                                    continue
                            for name, f in ainv:
                                if not f(s, t):
                                    tr = g.path(idx)
                                    raise _Violation(name, Trace(tr.states + [t], tr.labels + [label]))
                            key = encode(t)
                            if not exact:
                                key = _digest(key)
                            if key in g.index:
                                continue
                            j = g._add(key, idx, label)
                            for name, f in sinv:
                                if not f(t):
                                    tr = g.path(idx)
                                    raise _Violation(name, Trace(tr.states + [t], tr.labels + [label]))
                            if inside:
                                nxt.append((j, t))
                            else:
                                g.unexpanded.add(j)
                        if max_states is not None and len(g) >= max_states:
                            return finish(INCONCLUSIVE, message=f"state budget {max_states} exhausted")
                        if time_budget is not None and time.perf_counter() - start > time_budget:
                            return finish(INCONCLUSIVE, message="time budget exhausted")
                else:
                    nxt = _parallel_level(spec, g, pool, workers, bounds, count_out, invariants,
                                          action_invariants, frontier, stats, exact)
                    if max_states is not None and len(g) >= max_states:
                        return finish(INCONCLUSIVE, message=f"state budget {max_states} exhausted")
                    if time_budget is not None and time.perf_counter() - start > time_budget:
                        return finish(INCONCLUSIVE, message="time budget exhausted")
                if len(g) == g.level_starts[-1]:
                    g.level_starts.pop()
                frontier = nxt
                depth += 1
                log.debug("level %d: %d states total", depth, len(g))
        finally:
            if pool is not None:
                pool.shutdown()
    except _Violation as v:
        return finish(VIOLATION, v.prop, v.trace)
    except MemoryError:
        return finish(INCONCLUSIVE, message="out of memory")
    g.complete = True
    return finish(PASS)


def _path_with(g: StateGraph, idx: int, s) -> Trace:
    if idx in g.roots:
        return Trace([s])
    return g.path(idx)


def _parallel_level(spec, g, pool, workers, bounds, count_out, invs, ainvs, frontier, stats, exact):
    encs = [spec.encode(s) for _, s in frontier]
    size = max(1, -(-len(encs) // (workers * 4)))
    chunks = [encs[k:k + size] for k in range(0, len(encs), size)]
    futures = [pool.submit(_expand_chunk, spec.params, bounds, count_out, list(invs), list(ainvs), c)
               for c in chunks]
    nxt = []
    pos = 0
    # Merge in frontier order so that numbering and counterexamples match
    # the sequential exploration exactly.
    for fut in futures:
        for recs in fut.result():
            idx, s = frontier[pos]
            pos += 1
            for label, enc, inside, bad_a, bad_s in recs:
                stats["generated"] += 1
                if not inside:
                    stats["out_of_bounds"] += 1
                    if enc is None:
                        continue
                t = spec.decode(enc)
                if bad_a is not None:
                    tr = g.path(idx)
                    raise _Violation(bad_a, Trace(tr.states + [t], tr.labels + [label]))
                key = enc if exact else _digest(enc)
                if key in g.index:
                    continue
                j = g._add(key, idx, label)
                if bad_s is not None:
                    tr = g.path(idx)
                    raise _Violation(bad_s, Trace(tr.states + [t], tr.labels + [label]))
                if inside:
                    nxt.append((j, t))
                else:
                    g.unexpanded.add(j)
    return nxt


def bfs_check(spec: Spec, bounds: Bounds = Bounds(), invariants=(), action_invariants=(), **kw) -> CheckReport:
    """Check state and action invariants on every reachable state / edge."""
    report, _ = explore_graph(spec, bounds, invariants, action_invariants, check_name="bfs_check", **kw)
    return report


def check_quiescence(spec: Spec, bounds: Bounds = Bounds(), **kw) -> CheckReport:
    """terminated => terminated' on every reachable edge."""
    report, _ = explore_graph(spec, bounds, (), ("Quiescence",), check_name="check_quiescence", **kw)
    return report


# ---------------------------------------------------------------------------
# Liveness


def _tarjan(succ: list[list[int]]) -> list[int]:
    """Iterative Tarjan; returns the SCC id of every node."""
    n = len(succ)
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    comp = [-1] * n
    stack: list[int] = []
    counter = 0
    ncomp = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, k = work[-1]
            if k < len(succ[v]):
                work[-1] = (v, k + 1)
                w = succ[v][k]
                if index[w] == -1:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, 0))
                elif on_stack[w]:
                    low[v] = min(low[v], index[w])
            else:
                work.pop()
                if work:
                    u = work[-1][0]
                    low[u] = min(low[u], low[v])
                if low[v] == index[v]:
                    while True:
                        w = stack.pop()
                        on_stack[w] = False
                        comp[w] = ncomp
                        if w == v:
                            break
                    ncomp += 1
    return comp


def check_leadsto(
    spec: Spec,
    bounds: Bounds = Bounds(),
    prop: LeadsTo | str = "Live",
    fairness=None,
    *,
    graph: StateGraph | None = None,
    **kw,
) -> CheckReport:
    """Check ``P ~> Q`` under weak fairness on the bounded reachability graph.

    A counterexample is a lasso that reaches a ``P /\\ ~Q`` state and then
    stays in ``~Q`` forever while satisfying every fairness constraint: a
    stuttering self-loop at a state where every fair action is disabled, or
    a cycle inside an SCC on which each fair action is either taken or
    disabled somewhere.
    """
    lt = spec.leadsto(prop)
    fair = tuple(lt.fairness if fairness is None else fairness)
    P, Q = lt.p, lt.q
    start = time.perf_counter()
    if graph is None:
        build, graph = explore_graph(spec, bounds, check_name="check_leadsto", **kw)
        if build.verdict != PASS:
            return _leadsto_report(build.verdict, spec, graph, lt, fair, start,
                                   message=f"graph construction stopped: {build.message}")
    g = graph

    seeds = [i for i, s in g.states() if P(s) and not Q(s)]
    # Region: states reachable from a seed through ~Q states.
    local: dict[int, int] = {}
    gidx: list[int] = []
    rstates: list = []
    rparent: list[int] = []
    rlabel: list = []
    for i in seeds:
        local[i] = len(gidx)
        gidx.append(i)
        rstates.append(g.state(i))
        rparent.append(-1)
        rlabel.append(None)
    edges: list[list[tuple]] = []
    disabled: list[tuple] = []
    truncated = None
    k = 0
    while k < len(gidx):
        s = rstates[k]
        if gidx[k] in g.unexpanded:
            truncated = truncated or s
        succ = spec.successors(s)
        disabled.append(tuple(not any(f.covers(l) for l, _ in succ) for f in fair))
        out = []
        for label, t in succ:
            if Q(t):
                continue
            j = g.lookup(t) if g.spec.within(g.bounds, t) or g.constraint_mode == "count" else None
            if j is None:
                truncated = truncated or s
                continue
            lj = local.get(j)
            if lj is None:
                lj = local[j] = len(gidx)
                gidx.append(j)
                rstates.append(t)
                rparent.append(k)
                rlabel.append(label)
            out.append((label, lj))
        edges.append(out)
        k += 1

    comp = _tarjan([[v for _, v in e] for e in edges])
    members: dict[int, list[int]] = {}
    for v, c in enumerate(comp):
        members.setdefault(c, []).append(v)

    def fair_scc(c):
        S = members[c]
        if len(S) < 2:
            return None
        inside = set(S)
        plan = []
        for fi, f in enumerate(fair):
            dis = next((v for v in S if disabled[v][fi]), None)
            if dis is not None:
                plan.append(("state", dis))
                continue
            edge = next(((u, l, v) for u in S for l, v in edges[u] if v in inside and f.covers(l)), None)
            if edge is None:
                return None
            plan.append(("edge", edge))
        return plan

    witness = None
    for v in range(len(gidx)):
        if all(disabled[v]):
            witness = (v, None)
            break
        plan = fair_scc(comp[v])
        if plan is not None:
            witness = (v, plan)
            break

    if witness is None:
        if truncated is not None:
            return _leadsto_report(
                INCONCLUSIVE, spec, g, lt, fair, start, region=len(gidx),
                message="state constraint truncates the ~Q region; bounds may mask non-progress cycles",
            )
        return _leadsto_report(PASS, spec, g, lt, fair, start, region=len(gidx))

    v, plan = witness
    chain = []
    u = v
    while u >= 0:
        chain.append(u)
        u = rparent[u]
    chain.reverse()
    prefix = g.path(gidx[chain[0]])
    states, labels = list(prefix.states), list(prefix.labels)
    for u in chain[1:]:
        states.append(rstates[u])
        labels.append(rlabel[u])
    if plan is None:
        trace = Trace(states, labels, len(states) - 1, STUTTER)
    else:
        cyc_states, cyc_labels = _cycle(v, plan, edges, set(members[comp[v]]), rstates)
        loop_start = len(states) - 1
        states += cyc_states[1:-1]
        labels += cyc_labels[:-1]
        trace = Trace(states, labels, loop_start, cyc_labels[-1])
    return _leadsto_report(VIOLATION, spec, g, lt, fair, start, trace=trace, region=len(gidx))


def _bfs_within(src: int, dst: int, edges, inside: set) -> list[tuple]:
    """Shortest (label, node) path from src to dst inside an SCC."""
    if src == dst:
        return []
    prev = {src: None}
    queue = deque([src])
    while queue:
        u = queue.popleft()
        for l, w in edges[u]:
            if w in inside and w not in prev:
                prev[w] = (u, l)
                if w == dst:
                    path = []
                    while w != src:
                        u2, l2 = prev[w]
                        path.append((l2, w))
                        w = u2
                    return path[::-1]
                queue.append(w)
    raise AssertionError("SCC is not strongly connected")


def _cycle(v, plan, edges, inside, rstates):
    nodes, labels = [v], []
    cur = v
    steps = []
    for kind, target in plan:
        if kind == "state":
            steps = _bfs_within(cur, target, edges, inside)
        else:
            a, l, b = target
            steps = _bfs_within(cur, a, edges, inside) + [(l, b)]
        for l, w in steps:
            labels.append(l)
            nodes.append(w)
            cur = w
    if not labels:
        # No waypoint forced a move: leave v along any edge inside the SCC.
        l, w = next((l, w) for l, w in edges[v] if w in inside)
        labels.append(l)
        nodes.append(w)
        cur = w
    for l, w in _bfs_within(cur, v, edges, inside):
        labels.append(l)
        nodes.append(w)
    return [rstates[u] for u in nodes], labels


def _leadsto_report(verdict, spec, g, lt, fair, start, trace=None, region=0, message=""):
    return CheckReport(
        verdict=verdict,
        check="check_leadsto",
        spec=spec.params,
        distinct_states=len(g),
        diameter=g.diameter,
        violated_property=lt.name if verdict == VIOLATION else None,
        counterexample=trace,
        wall_time=time.perf_counter() - start,
        soundness="exact" if g.exact else "probabilistic",
        properties=(lt.name,),
        stats={
            "fairness": [str(f) for f in fair],
            "region_states": region,
            "bounds": g.bounds.to_json(),
            "constraint_mode": g.constraint_mode,
        },
        message=message,
    )
