"""Safra's token-ring termination detection algorithm (EWD 998).

Each node keeps a color and a counter of sent minus received messages.  A
token carrying position ``p``, color ``c`` and an accumulated counter ``q``
travels from node ``N-1`` down to node 0, which decides whether the ring has
terminated.

Besides the transition relation this module provides the inductive
invariant :func:`inv`, the detection predicate :func:`term_detect`, the
refinement mapping :meth:`SafraSpec.refine` into the abstract machine and a
catalogue of seeded bugs (mutants).
"""
from __future__ import annotations

import itertools
import struct
from enum import IntEnum
from typing import Iterable, Iterator, NamedTuple

from .abstract import AbstractSpec, AbstractState, terminated
from .kernel import ENCODING_VERSION, Bounds, ConfigurationError, Fairness, Label, LeadsTo, Spec


class Color(IntEnum):
    WHITE = 0
    BLACK = 1

    def __str__(self) -> str:
        return self.name.lower()


WHITE, BLACK = Color.WHITE, Color.BLACK
_COLORS = (WHITE, BLACK)


class Token(NamedTuple):
    p: int
    c: Color
    q: int


class SafraState(NamedTuple):
    active: tuple
    pending: tuple
    color: tuple
    counter: tuple
    token: Token

    def __str__(self) -> str:
        act = "".join("A" if a else "-" for a in self.active)
        col = "".join("B" if c else "w" for c in self.color)
        t = self.token
        return (
            f"active={act} pending={list(self.pending)} color={col} counter={list(self.counter)} "
            f"token=(p={t.p}, c={t.c}, q={t.q})"
        )


# Mutant catalogue.  The last entry is not one of the bugs described for
# the algorithm; it stands in for the unnamed sixth seeded bug.
MUTANTS = {
    "token-adopts-node-color": "PassToken sets the token color to the node color",
    "token-init-white": "the token starts white",
    "pass-while-active": "an active node may pass the token",
    "no-whiten-on-pass": "a node passing the token stays black",
    "no-initiate-when-black": "node 0 may not initiate a round while black",
    "receiver-not-blackened": "receiving a message does not blacken the receiver (stand-in)",
}
STAND_IN_MUTANTS = frozenset({"receiver-not-blackened"})
TOKEN_STARTS = ("any", "initiator")


def node_range(a: int, b: int, n: int) -> range:
    """Nodes i with a <= i <= b (empty when a > b)."""
    return range(max(a, 0), min(b, n - 1) + 1)


def sum_over(f, nodes: Iterable[int]) -> int:
    return sum(f[i] for i in nodes)


def term_detect(s) -> bool:
    """Node 0 declares termination."""
    t = s.token
    return (
        t.p == 0
        and t.c == WHITE
        and s.color[0] == WHITE
        and not s.active[0]
        and s.pending[0] == 0
        and t.q + s.counter[0] == 0
    )


def inv(s) -> bool:
    """Dijkstra's invariant: message conservation plus the four-way disjunction."""
    n = len(s.active)
    p, c, q = s.token
    if sum(s.pending) != sum(s.counter):
        return False
    behind = range(p + 1, n)
    if all(not s.active[i] for i in behind) and q == sum_over(s.counter, behind):
        return True
    ahead = range(0, p + 1)
    if sum_over(s.counter, ahead) + q > 0:
        return True
    if any(s.color[i] == BLACK for i in ahead):
        return True
    return c == BLACK


def message_conservation(s) -> bool:
    return sum(s.pending) == sum(s.counter)


class SafraSpec(Spec):
    name = "safra"
    kind = 2
    actions = ("InitiateProbe", "PassToken", "SendMsg", "RcvMsg", "Terminate")
    arity = {"InitiateProbe": 0, "PassToken": 1, "SendMsg": 2, "RcvMsg": 1, "Terminate": 1}
    mutants = tuple(MUTANTS)

    def __init__(self, n: int, mutant: str | None = None, token_start: str = "any"):
        super().__init__(n, mutant)
        if token_start not in TOKEN_STARTS:
            raise ConfigurationError(f"token_start must be one of {TOKEN_STARTS}, got {token_start!r}")
        # "any": the initial token may sit at any node; "initiator": it starts at node 0.
        self.token_start = token_start
        self._start_positions = self.nodes if token_start == "any" else range(1)
        self.abstract = AbstractSpec(n)
        self._struct = struct.Struct(f"<BBH{n}B{n}i{n}B{n}iiBi")
        self._init_label = Label("InitiateProbe")
        self._pass = [Label("PassToken", (i,)) for i in self.nodes]
        self._send = [[Label("SendMsg", (i, j)) for j in self.nodes] for i in self.nodes]
        self._rcv = [Label("RcvMsg", (i,)) for i in self.nodes]
        self._term = [Label("Terminate", (i,)) for i in self.nodes]
        self._fresh_token = Token(n - 1, WHITE, 0)

        system = Fairness(frozenset({"InitiateProbe", "PassToken"}), "WF(System)")
        self.fairness = (system,)

        def is_type_inv(s):
            return self.type_ok(s) and inv(s)

        self.state_predicates = {
            "TypeOK": self.type_ok,
            "Inv": inv,
            "IndInv": is_type_inv,
            "MessageConservation": message_conservation,
            "termDetect": term_detect,
            "terminated": terminated,
            "SafeInv": safe_inv,
            "Safe": safe_inv,
            "LemmaSafety": lambda s: not (is_type_inv(s) and term_detect(s)) or terminated(s),
            "EnabledDT": lambda s: self.abstract.enabled_dt(self.refine(s)),
            "refinement-init": lambda s: self.abstract.is_initial(self.refine(s)),
            "Init": self.is_initial,
        }
        self.action_predicates = {
            "Quiescence": quiescence_step,
            "quiescence-step": quiescence_step,
            "refinement-step": self.refinement_step,
        }

        def at_zero(s):
            return terminated(s) and s.token.p == 0

        def at_zero_white(s):
            return at_zero(s) and all(c == WHITE for c in s.color)

        def undetected(s):
            return terminated(s) and not term_detect(s)

        self.properties = {
            "round1": LeadsTo("round1", terminated, at_zero, (system,),
                              "terminated ~> (terminated /\\ token.p = 0)"),
            "round2": LeadsTo("round2", terminated, at_zero_white, (system,),
                              "terminated ~> (terminated /\\ token.p = 0 /\\ all nodes white)"),
            "round3": LeadsTo("round3", terminated, term_detect, (system,),
                              "terminated ~> termDetect"),
            "Live": LeadsTo("Live", terminated, term_detect, (system,),
                            "terminated ~> termDetect"),
            # Weak fairness of DetectTermination in the abstract machine, read
            # through the refinement mapping: a fair behavior must not stay in
            # terminated /\ ~termDetect forever.
            "refinement-fairness": LeadsTo(
                "refinement-fairness", undetected, lambda s: not undetected(s), (system,),
                "WF(TD!DetectTermination) under the refinement mapping",
            ),
        }

    # -- transition relation --------------------------------------------------
    @property
    def initial_token_color(self) -> Color:
        return WHITE if self.mutant == "token-init-white" else BLACK

    def initial_states(self) -> Iterator[SafraState]:
        zeros = (0,) * self.n
        c0 = self.initial_token_color
        bools = (False, True)
        for active in itertools.product(bools, repeat=self.n):
            for color in itertools.product((WHITE, BLACK), repeat=self.n):
                for p in self._start_positions:
                    yield SafraState(active, zeros, color, zeros, Token(p, c0, 0))

    @property
    def options(self) -> dict:
        return {} if self.token_start == "any" else {"token_start": self.token_start}

    def sample_initial(self, rng) -> SafraState:
        zeros = (0,) * self.n
        active = tuple(rng.random() < 0.5 for _ in self.nodes)
        color = tuple(_COLORS[rng.randrange(2)] for _ in self.nodes)
        return SafraState(active, zeros, color, zeros, Token(rng.choice(self._start_positions), self.initial_token_color, 0))

    def is_initial(self, s) -> bool:
        if not self.type_ok(s):
            return False
        t = s.token
        return (
            not any(s.pending)
            and not any(s.counter)
            and t.c == self.initial_token_color
            and t.q == 0
            and t.p in self._start_positions
        )

    def successors(self, s) -> list:
        out = self._initiate(s) + self._pass_token(s)
        for i in self.nodes:
            if s.active[i]:
                out += self._send_msg(s, i)
        for i in self.nodes:
            if s.pending[i] > 0:
                out += self._rcv_msg(s, i)
        for i in self.nodes:
            if s.active[i]:
                out += self._terminate(s, i)
        return out

    def instances(self, s) -> list:
        active, pending = s.active, s.pending
        out = []
        if self._initiate(s):
            out.append(("InitiateProbe", None))
        p = s.token.p
        if p != 0 and (not active[p] or self.mutant == "pass-while-active"):
            out.append(("PassToken", p))
        out += [("SendMsg", i) for i in self.nodes if active[i]]
        out += [("RcvMsg", i) for i in self.nodes if pending[i] > 0]
        out += [("Terminate", i) for i in self.nodes if active[i]]
        return out

    def instance_successors(self, s, instance) -> list:
        action, i = instance
        if action == "InitiateProbe":
            return self._initiate(s)
        if action == "PassToken":
            return self._pass_token(s)
        if action == "SendMsg":
            return self._send_msg(s, i)
        if action == "RcvMsg":
            return self._rcv_msg(s, i)
        return self._terminate(s, i)

    def _initiate(self, s) -> list:
        active, pending, color, counter, token = s
        p, c, q = token
        if p != 0 or not (c == BLACK or color[0] == BLACK or counter[0] + q > 0):
            return []
        if self.mutant == "no-initiate-when-black" and color[0] == BLACK:
            return []
        col = (WHITE,) + color[1:]
        # With N = 1 the fresh token lands back on node 0 and the step may
        # leave every variable unchanged; such stutters are dropped.
        if col == color and token == self._fresh_token:
            return []
        return [(self._init_label, SafraState(active, pending, col, counter, self._fresh_token))]

    def _pass_token(self, s) -> list:
        active, pending, color, counter, token = s
        i, c, q = token
        mutant = self.mutant
        if i == 0 or (active[i] and mutant != "pass-while-active"):
            return []
        if mutant == "token-adopts-node-color":
            tc = color[i]
        else:
            tc = BLACK if (color[i] == BLACK or c == BLACK) else WHITE
        col = color if mutant == "no-whiten-on-pass" else color[:i] + (WHITE,) + color[i + 1:]
        return [(self._pass[i], SafraState(active, pending, col, counter, Token(i - 1, tc, q + counter[i])))]

    def _send_msg(self, s, i) -> list:
        active, pending, color, counter, token = s
        cnt = counter[:i] + (counter[i] + 1,) + counter[i + 1:]
        labels = self._send[i]
        return [
            (labels[j], SafraState(active, pending[:j] + (pending[j] + 1,) + pending[j + 1:], color, cnt, token))
            for j in self.nodes
        ]

    def _rcv_msg(self, s, i) -> list:
        active, pending, color, counter, token = s
        act = active[:i] + (True,) + active[i + 1:]
        pen = pending[:i] + (pending[i] - 1,) + pending[i + 1:]
        cnt = counter[:i] + (counter[i] - 1,) + counter[i + 1:]
        col = color if self.mutant == "receiver-not-blackened" else color[:i] + (BLACK,) + color[i + 1:]
        return [(self._rcv[i], SafraState(act, pen, col, cnt, token))]

    def _terminate(self, s, i) -> list:
        active, pending, color, counter, token = s
        act = active[:i] + (False,) + active[i + 1:]
        return [(self._term[i], SafraState(act, pending, color, counter, token))]

    # -- predicates -------------------------------------------------------------
    def type_ok(self, s) -> bool:
        try:
            active, pending, color, counter, token = s
            p, c, q = token
        except (TypeError, ValueError):
            return False

        def is_int(x):
            return isinstance(x, int) and not isinstance(x, bool)

        n = self.n
        return (
            len(active) == n and len(pending) == n and len(color) == n and len(counter) == n
            and all(isinstance(a, bool) for a in active)
            and all(is_int(x) and x >= 0 for x in pending)
            and all(isinstance(x, Color) for x in color)
            and all(is_int(x) for x in counter)
            and is_int(p) and 0 <= p < n
            and isinstance(c, Color)
            and is_int(q)
        )

    def refine(self, s) -> AbstractState:
        """Refinement mapping into the abstract machine."""
        return AbstractState(s.active, s.pending, term_detect(s))

    def refinement_step(self, s, t) -> bool:
        """The image of s -> t is a step of [TD!Next]_TD!vars."""
        a, b = self.refine(s), self.refine(t)
        if a == b:
            return True
        return self.abstract.is_step(a, b)

    # -- bounds, universe, encoding ---------------------------------------------
    def within(self, bounds: Bounds, s) -> bool:
        if bounds.K is not None and max(s.pending) > bounds.K:
            return False
        if bounds.C is not None:
            c = bounds.C
            for x in s.counter:
                if x > c or x < -c:
                    return False
        if bounds.Q is not None and abs(s.token.q) > bounds.Q:
            return False
        return True

    def domains(self, bounds: Bounds) -> list:
        if bounds.K is None or bounds.C is None or bounds.Q is None:
            raise ConfigurationError("enumerating Safra states needs bounds K, C and Q")
        n = self.n
        bools = (False, True)
        colors = (WHITE, BLACK)
        return (
            [bools] * n
            + [tuple(range(bounds.K + 1))] * n
            + [colors] * n
            + [tuple(range(-bounds.C, bounds.C + 1))] * n
            + [tuple(self.nodes), colors, tuple(range(-bounds.Q, bounds.Q + 1))]
        )

    def assemble(self, values: tuple) -> SafraState:
        n = self.n
        return SafraState(
            tuple(values[:n]),
            tuple(values[n:2 * n]),
            tuple(values[2 * n:3 * n]),
            tuple(values[3 * n:4 * n]),
            Token(*values[4 * n:]),
        )

    def encode(self, s) -> bytes:
        t = s.token
        return self._struct.pack(
            ENCODING_VERSION, self.kind, self.n,
            *s.active, *s.pending, *s.color, *s.counter, t.p, t.c, t.q,
        )

    def decode(self, data: bytes) -> SafraState:
        v = self._struct.unpack(data)
        if v[0] != ENCODING_VERSION or v[1] != self.kind or v[2] != self.n:
            raise ValueError("encoding does not belong to this spec instance")
        n = self.n
        v = v[3:]
        return SafraState(
            tuple(map(bool, v[:n])),
            v[n:2 * n],
            tuple(map(_COLORS.__getitem__, v[2 * n:3 * n])),
            v[3 * n:4 * n],
            Token(v[4 * n], _COLORS[v[4 * n + 1]], v[4 * n + 2]),
        )

    def state_to_json(self, s) -> dict:
        t = s.token
        return {
            "active": list(s.active),
            "pending": list(s.pending),
            "color": [str(c) for c in s.color],
            "counter": list(s.counter),
            "token": {"p": t.p, "c": str(t.c), "q": t.q},
        }

    def state_from_json(self, data: dict) -> SafraState:
        try:
            colors = {"white": WHITE, "black": BLACK}
            tok = data["token"]
            s = SafraState(
                tuple(data["active"]),
                tuple(data["pending"]),
                tuple(colors[c] for c in data["color"]),
                tuple(data["counter"]),
                Token(tok["p"], colors[tok["c"]], tok["q"]),
            )
        except (KeyError, TypeError) as exc:
            raise TypeError(f"malformed Safra state: {data!r}") from exc
        if not self.type_ok(s):
            raise TypeError(f"not a type-correct Safra state for N={self.n}: {data}")
        return s


def safe_inv(s) -> bool:
    """termDetect => terminated"""
    return not term_detect(s) or terminated(s)


def quiescence_step(s, t) -> bool:
    return not terminated(s) or terminated(t)
