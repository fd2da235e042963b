"""High-level termination-detection state machine.

Nodes are active or inactive, messages pending at a node are counted, and
``term_detect`` records whether termination has been announced.  This is
the specification every detection algorithm must refine.
"""
from __future__ import annotations

import itertools
import struct
from typing import Iterator, NamedTuple

from .kernel import ENCODING_VERSION, Bounds, ConfigurationError, Fairness, Label, LeadsTo, Spec


class AbstractState(NamedTuple):
    active: tuple
    pending: tuple
    term_detect: bool

    def __str__(self) -> str:
        act = "".join("A" if a else "-" for a in self.active)
        return f"active={act} pending={list(self.pending)} termDetect={self.term_detect}"


def terminated(s) -> bool:
    """All nodes inactive and no message pending anywhere."""
    return not any(s.active) and not any(s.pending)


class AbstractSpec(Spec):
    name = "abstract"
    kind = 1
    # Enumeration order follows the disjuncts of Next.
    actions = ("RcvMsg", "Terminate", "SendMsg", "DetectTermination")
    arity = {"RcvMsg": 1, "Terminate": 1, "SendMsg": 2, "DetectTermination": 0}
    mutants = ("drop-send-guard",)

    def __init__(self, n: int, mutant: str | None = None):
        super().__init__(n, mutant)
        self._send_guarded = mutant != "drop-send-guard"
        self._struct = struct.Struct(f"<BBH{n}B{n}iB")
        self._rcv = [Label("RcvMsg", (i,)) for i in self.nodes]
        self._term = [Label("Terminate", (i,)) for i in self.nodes]
        self._send = [[Label("SendMsg", (i, j)) for j in self.nodes] for i in self.nodes]
        self._detect = Label("DetectTermination")

        detect = Fairness(frozenset({"DetectTermination"}), "WF(DetectTermination)")
        self.fairness = (detect,)
        self.state_predicates = {
            "TypeOK": self.type_ok,
            "SafeInv": safe_inv,
            "Safe": safe_inv,
            "IndInv": lambda s: self.type_ok(s) and safe_inv(s),
            "terminated": terminated,
            "termDetect": lambda s: bool(s.term_detect),
            "EnabledDT": self.enabled_dt,
            "Init": self.is_initial,
        }
        self.action_predicates = {
            "Quiescence": quiescence_step,
            "quiescence-step": quiescence_step,
        }
        live = LeadsTo(
            "Live", terminated, lambda s: bool(s.term_detect), (detect,),
            "terminated ~> termDetect under WF(DetectTermination)",
        )
        self.properties = {"Live": live}

    # -- transition relation --------------------------------------------------
    def initial_states(self) -> Iterator[AbstractState]:
        zeros = (0,) * self.n
        for active in itertools.product((False, True), repeat=self.n):
            yield AbstractState(active, zeros, False)
            if not any(active):
                yield AbstractState(active, zeros, True)

    def sample_initial(self, rng) -> AbstractState:
        # 2^n states with termDetect false plus the all-idle detected one
        r = rng.randrange((1 << self.n) + 1)
        zeros = (0,) * self.n
        if r == 1 << self.n:
            return AbstractState((False,) * self.n, zeros, True)
        return AbstractState(tuple(bool(r >> i & 1) for i in self.nodes), zeros, False)

    def is_initial(self, s) -> bool:
        if not self.type_ok(s) or any(s.pending):
            return False
        return not s.term_detect or terminated(s)

    def successors(self, s) -> list:
        active, pending, td = s
        out = []
        for i in self.nodes:
            if pending[i] > 0:
                a = active[:i] + (True,) + active[i + 1:]
                p = pending[:i] + (pending[i] - 1,) + pending[i + 1:]
                out.append((self._rcv[i], AbstractState(a, p, td)))
        for i in self.nodes:
            if active[i]:
                a = active[:i] + (False,) + active[i + 1:]
                out.append((self._term[i], AbstractState(a, pending, td)))
                # termDetect' \in {termDetect, terminated'}
                done = not any(a) and not any(pending)
                if done != td:
                    out.append((self._term[i], AbstractState(a, pending, done)))
        for i in self.nodes:
            if active[i] or not self._send_guarded:
                for j in self.nodes:
                    p = pending[:j] + (pending[j] + 1,) + pending[j + 1:]
                    out.append((self._send[i][j], AbstractState(active, p, td)))
        if not td and not any(active) and not any(pending):
            out.append((self._detect, AbstractState(active, pending, True)))
        return out

    def is_step(self, a, b) -> bool:
        """b is a successor of a (same relation as ``successors``, without enumerating it)."""
        (act, pen, td), (act2, pen2, td2) = a, b
        da = [i for i in self.nodes if act[i] != act2[i]]
        dp = [i for i in self.nodes if pen[i] != pen2[i]]
        if len(da) > 1 or len(dp) > 1:
            return False
        if td != td2:
            if not da and not dp:  # DetectTermination
                return td2 and not any(act) and not any(pen)
            # Terminate(i) with termDetect' = terminated'
            return not dp and act[da[0]] and td2 == (not any(act2) and not any(pen2))
        if dp:
            j = dp[0]
            if pen2[j] == pen[j] - 1:  # RcvMsg(j)
                return act2[j] and (not da or da[0] == j)
            if pen2[j] != pen[j] + 1 or da:  # SendMsg(i, j)
                return False
            return not self._send_guarded or any(act)
        return bool(da) and act[da[0]]  # Terminate(i)

    # -- predicates -------------------------------------------------------------
    def type_ok(self, s) -> bool:
        try:
            active, pending, td = s
        except (TypeError, ValueError):
            return False
        return (
            len(active) == self.n
            and len(pending) == self.n
            and all(isinstance(a, bool) for a in active)
            and all(isinstance(p, int) and not isinstance(p, bool) and p >= 0 for p in pending)
            and isinstance(td, bool)
        )

    def enabled_dt(self, s) -> bool:
        """ENABLED <DetectTermination>_vars  <=>  terminated /\\ ~termDetect."""
        lhs = self.enabled(("DetectTermination",), s)
        return lhs == (terminated(s) and not s.term_detect)

    # -- bounds, universe, encoding ---------------------------------------------
    def within(self, bounds: Bounds, s) -> bool:
        return bounds.K is None or max(s.pending) <= bounds.K

    def domains(self, bounds: Bounds) -> list:
        if bounds.K is None:
            raise ConfigurationError("enumerating abstract states needs a bound K")
        bools = (False, True)
        return [bools] * self.n + [tuple(range(bounds.K + 1))] * self.n + [bools]

    def assemble(self, values: tuple) -> AbstractState:
        n = self.n
        return AbstractState(tuple(values[:n]), tuple(values[n:2 * n]), values[2 * n])

    def encode(self, s) -> bytes:
        return self._struct.pack(ENCODING_VERSION, self.kind, self.n, *s.active, *s.pending, s.term_detect)

    def decode(self, data: bytes) -> AbstractState:
        v = self._struct.unpack(data)
        if v[0] != ENCODING_VERSION or v[1] != self.kind or v[2] != self.n:
            raise ValueError("encoding does not belong to this spec instance")
        n = self.n
        return AbstractState(tuple(bool(x) for x in v[3:3 + n]), tuple(v[3 + n:3 + 2 * n]), bool(v[-1]))

    def state_to_json(self, s) -> dict:
        return {"active": list(s.active), "pending": list(s.pending), "term_detect": s.term_detect}

    def state_from_json(self, data: dict) -> AbstractState:
        s = AbstractState(tuple(data["active"]), tuple(data["pending"]), data["term_detect"])
        if not self.type_ok(s):
            raise TypeError(f"not a type-correct abstract state for N={self.n}: {data}")
        return s


def safe_inv(s) -> bool:
    """termDetect => terminated"""
    return not s.term_detect or terminated(s)


def quiescence_step(s, t) -> bool:
    """terminated => terminated'"""
    return not terminated(s) or terminated(t)
