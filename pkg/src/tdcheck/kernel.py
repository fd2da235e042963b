"""State-machine interface shared by the specifications and every checker.

A :class:`Spec` enumerates initial states, produces labelled successors,
and exposes named state predicates, action predicates, leads-to properties
and weak-fairness constraints.  Checkers only talk to this interface.

Canonical encoding
------------------
Every state has a canonical byte encoding used for deduplication, trace
comparison and fingerprints.  Layout (little-endian, fixed width)::

    u8  format version (ENCODING_VERSION)
    u8  spec kind (1 = abstract, 2 = safra)
    u16 N
    abstract: N x u8 active | N x i32 pending | u8 term_detect
    safra:    N x u8 active | N x i32 pending | N x u8 color |
              N x i32 counter | i32 token.p | u8 token.c | i32 token.q

Colors encode as 0 = white, 1 = black.
"""
from __future__ import annotations

import hashlib
import itertools
import random
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Iterator, NamedTuple

ENCODING_VERSION = 1

STUTTER = "stutter"


class ConfigurationError(ValueError):
    """Invalid spec parameters, bounds, mutant or property name."""


class Label(NamedTuple):
    action: str
    args: tuple[int, ...] = ()

    def __str__(self) -> str:
        if not self.args:
            return self.action
        return f"{self.action}({', '.join(map(str, self.args))})"

    def to_json(self) -> dict:
        return {"action": self.action, "args": list(self.args)}

    @classmethod
    def parse(cls, text: str) -> "Label":
        text = text.strip()
        if "(" not in text:
            return cls(text)
        name, rest = text.split("(", 1)
        rest = rest.rstrip(")").strip()
        args = tuple(int(a) for a in rest.split(",")) if rest else ()
        return cls(name.strip(), args)


@dataclass(frozen=True)
class Fairness:
    """Weak fairness WF_vars(A) where A is the union of ``actions``.

    Only non-stuttering edges exist in the graph, so an edge counts as an
    <A>_vars step exactly when its action is in ``actions``.
    """

    actions: frozenset
    name: str = ""
    kind: str = "WF"

    def covers(self, label) -> bool:
        return label != STUTTER and label.action in self.actions

    def __str__(self) -> str:
        if self.name:
            return self.name
        return "WF(" + " | ".join(sorted(self.actions)) + ")"


@dataclass(frozen=True)
class LeadsTo:
    """``p ~> q`` checked under the given weak-fairness constraints."""

    name: str
    p: Callable[[Any], bool]
    q: Callable[[Any], bool]
    fairness: tuple = ()
    description: str = ""


@dataclass(frozen=True)
class Bounds:
    """State constraint: pending <= K, |counter| <= C, |token.q| <= Q.

    ``None`` leaves a dimension unconstrained.
    """

    K: int | None = None
    C: int | None = None
    Q: int | None = None
    max_depth: int | None = None

    def __post_init__(self):
        for name in ("K", "C", "Q", "max_depth"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ConfigurationError(f"bound {name} must be >= 0, got {v}")

    @property
    def unbounded(self) -> bool:
        return self.K is None and self.C is None and self.Q is None

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in ("K", "C", "Q", "max_depth")}


@dataclass
class Trace:
    """A finite behavior, optionally closed into a lasso.

    ``labels[k]`` relates ``states[k]`` to ``states[k + 1]``.  When
    ``loop_start`` is set, the behavior continues from the last state back
    to ``states[loop_start]`` via ``loop_label`` (``"stutter"`` for a
    stuttering self-loop) and repeats forever.
    """

    states: list
    labels: list = field(default_factory=list)
    loop_start: int | None = None
    loop_label: Any = None

    def __post_init__(self):
        if len(self.labels) != max(len(self.states) - 1, 0):
            raise ValueError("a trace needs exactly one label per step")

    def __len__(self) -> int:
        return len(self.states)

    @property
    def is_lasso(self) -> bool:
        return self.loop_start is not None

    def steps(self) -> Iterator[tuple]:
        """Yield (pre, label, post) for every step including the loop-back."""
        for k, label in enumerate(self.labels):
            yield self.states[k], label, self.states[k + 1]
        if self.is_lasso:
            yield self.states[-1], self.loop_label, self.states[self.loop_start]

    def to_json(self, spec: "Spec") -> dict:
        def lab(x):
            return STUTTER if x == STUTTER else x.to_json()

        out = {
            "states": [spec.state_to_json(s) for s in self.states],
            "labels": [lab(x) for x in self.labels],
            "fingerprints": [spec.fingerprint(s) for s in self.states],
        }
        if self.is_lasso:
            out["loop_start"] = self.loop_start
            out["loop_label"] = lab(self.loop_label)
        return out

    @classmethod
    def from_json(cls, spec: "Spec", data: dict) -> "Trace":
        def lab(x):
            return STUTTER if x == STUTTER else Label(x["action"], tuple(x["args"]))

        states = [spec.state_from_json(s) for s in data["states"]]
        labels = [lab(x) for x in data["labels"]]
        loop = data.get("loop_start")
        return cls(states, labels, loop, lab(data["loop_label"]) if loop is not None else None)


def replay(spec: "Spec", trace: Trace, from_init: bool = True) -> int | None:
    """Return the index of the first step not justified by the spec, else None.

    Index 0 means the first state is not initial; index k means the step
    into ``states[k]`` (or the loop-back edge, index ``len(states)``) fails.
    Inductive-check counterexamples start anywhere: pass ``from_init=False``.
    """
    if from_init and not spec.is_initial(trace.states[0]):
        return 0
    for k, (pre, label, post) in enumerate(trace.steps(), start=1):
        if label == STUTTER:
            if spec.encode(pre) != spec.encode(post):
                return k
            continue
        if not any(l == label and t == post for l, t in spec.successors(pre)):
            return k
    return None


class Spec:
    """Base class for a compiled-in specification instance.

    Subclasses fill in the action tables and predicate registries; this
    class supplies the generic machinery (predicate lookup, enabledness,
    fingerprints, bounded enumeration and sampling).
    """

    name = "spec"
    kind = 0
    actions: tuple = ()
    arity: dict = {}
    mutants: tuple = ()

    def __init__(self, n: int, mutant: str | None = None):
        if not isinstance(n, int) or isinstance(n, bool) or n < 1:
            raise ConfigurationError(f"N must be a positive integer, got {n!r}")
        if mutant is not None and mutant not in self.mutants:
            raise ConfigurationError(
                f"unknown mutant {mutant!r} for {self.name}; choose from {', '.join(self.mutants)}"
            )
        self.n = n
        self.mutant = mutant
        self.nodes = range(n)
        self.state_predicates: dict[str, Callable] = {}
        self.action_predicates: dict[str, Callable] = {}
        self.properties: dict[str, LeadsTo] = {}
        self.fairness: tuple = ()

    # -- identity ---------------------------------------------------------
    @property
    def options(self) -> dict:
        """Non-default model options, as keyword arguments of the constructor."""
        return {}

    @property
    def params(self) -> dict:
        return {"spec": self.name, "n": self.n, "mutant": self.mutant, **self.options}

    def __repr__(self) -> str:
        extra = f", mutant={self.mutant!r}" if self.mutant else ""
        extra += "".join(f", {k}={v!r}" for k, v in self.options.items())
        return f"{type(self).__name__}(n={self.n}{extra})"

    def __reduce__(self):
        return (spec_from_params, (self.params,))

    # -- to be provided by subclasses --------------------------------------
    def initial_states(self) -> Iterator:
        raise NotImplementedError

    def successors(self, s) -> list:
        raise NotImplementedError

    def is_initial(self, s) -> bool:
        raise NotImplementedError

    def type_ok(self, s) -> bool:
        raise NotImplementedError

    def within(self, bounds: Bounds, s) -> bool:
        raise NotImplementedError

    def domains(self, bounds: Bounds) -> list:
        """Per-field value lists of the bounded type-correct universe."""
        raise NotImplementedError

    def assemble(self, values: tuple):
        """Build a state from one value per entry of :meth:`domains`."""
        raise NotImplementedError

    def encode(self, s) -> bytes:
        raise NotImplementedError

    def decode(self, data: bytes):
        raise NotImplementedError

    def state_to_json(self, s) -> dict:
        raise NotImplementedError

    def state_from_json(self, data: dict):
        raise NotImplementedError

    # -- generic machinery --------------------------------------------------
    def fingerprint(self, s) -> str:
        return hashlib.blake2b(self.encode(s), digest_size=8).hexdigest()

    def state_predicate(self, name):
        if callable(name):
            return name
        try:
            return self.state_predicates[name]
        except KeyError:
            raise ConfigurationError(
                f"unknown state predicate {name!r} for {self.name}; "
                f"known: {', '.join(sorted(self.state_predicates))}"
            ) from None

    def action_predicate(self, name):
        if callable(name):
            return name
        try:
            return self.action_predicates[name]
        except KeyError:
            raise ConfigurationError(
                f"unknown action predicate {name!r} for {self.name}; "
                f"known: {', '.join(sorted(self.action_predicates))}"
            ) from None

    def leadsto(self, name) -> LeadsTo:
        if isinstance(name, LeadsTo):
            return name
        try:
            return self.properties[name]
        except KeyError:
            raise ConfigurationError(
                f"unknown temporal property {name!r} for {self.name}; "
                f"known: {', '.join(sorted(self.properties))}"
            ) from None

    def property_kind(self, name) -> str:
        """Classify a property name as 'state', 'action' or 'leadsto'."""
        if name in self.state_predicates:
            return "state"
        if name in self.action_predicates:
            return "action"
        if name in self.properties:
            return "leadsto"
        raise ConfigurationError(f"unknown property {name!r} for {self.name}")

    def eval_state_predicate(self, name, s) -> bool:
        return bool(self.state_predicate(name)(s))

    def eval_action_predicate(self, name, s, t) -> bool:
        return bool(self.action_predicate(name)(s, t))

    def check_label(self, label: Label) -> None:
        if label.action not in self.arity:
            raise ConfigurationError(f"unknown action {label.action!r} for {self.name}")
        if len(label.args) != self.arity[label.action]:
            raise ConfigurationError(f"{label.action} takes {self.arity[label.action]} argument(s)")
        if any(not 0 <= a < self.n for a in label.args):
            raise ConfigurationError(f"argument out of range in {label}")

    def enabled(self, actions: Iterable[str], s) -> bool:
        """ENABLED <A>_vars for A the union of ``actions``."""
        actions = frozenset(actions)
        if not actions:
            return False
        return any(label.action in actions for label, _ in self.successors(s))

    def instances(self, s) -> list:
        """Enabled action instances: (action, first argument or None)."""
        return list(dict.fromkeys((l.action, l.args[0] if l.args else None) for l, _ in self.successors(s)))

    def instance_successors(self, s, instance) -> list:
        action, arg = instance
        return [(l, t) for l, t in self.successors(s)
                if l.action == action and (l.args[0] if l.args else None) == arg]

    def successors_for(self, label: Label, s) -> list:
        return [t for l, t in self.successors(s) if l == label]

    def universe(self, bounds: Bounds) -> Iterator:
        """Every type-correct state inside ``bounds`` (each exactly once)."""
        for values in itertools.product(*self.domains(bounds)):
            yield self.assemble(values)

    def universe_size(self, bounds: Bounds) -> int:
        size = 1
        for d in self.domains(bounds):
            size *= len(d)
        return size

    def sample_initial(self, rng: random.Random):
        """Draw one initial state uniformly."""
        cache = self.__dict__.get("_init_cache")
        if cache is None:
            cache = self._init_cache = list(self.initial_states())
        return cache[rng.randrange(len(cache))]

    def sample(self, bounds: Bounds, rng: random.Random):
        """Draw one state uniformly from the bounded type-correct universe."""
        return self.assemble(tuple(rng.choice(d) for d in self.domains(bounds)))


def make_spec(name: str, n: int, mutant: str | None = None, **options) -> Spec:
    from .abstract import AbstractSpec
    from .safra import SafraSpec

    specs = {"abstract": AbstractSpec, "safra": SafraSpec}
    try:
        cls = specs[name]
    except KeyError:
        raise ConfigurationError(f"unknown spec {name!r}; choose abstract or safra") from None
    try:
        return cls(n, mutant, **options)
    except TypeError as exc:
        raise ConfigurationError(f"bad options for {name}: {exc}") from None


def spec_from_params(params: dict) -> Spec:
    """Rebuild a spec from its ``params`` dictionary."""
    p = dict(params)
    return make_spec(p.pop("spec"), p.pop("n"), p.pop("mutant", None), **p)
