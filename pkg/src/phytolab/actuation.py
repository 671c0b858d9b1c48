"""Detector-to-actuator wiring: trigger expressions, actuators, homeostat.

Bindings couple a boolean expression over the detector output vector to an
actuator.  Expressions use three-valued logic: a comparison touching a
detector entry that still reads 0.0 (the no-data marker) is unknown rather
than false, and unknown never fires an actuator.  Comparing explicitly
against a literal 0 opts out of that rule, which is how pathogenicity green
(status 0) stays testable.

Every binding must be provably quiet on an idle bench: with all comparisons
forced false and every BERNOULLI forced true the expression has to come out
not-true, otherwise the configuration is rejected.  This closes the door on
NOT-constructions that would actuate spontaneously.

A per-binding homeostat tracks the smoothed firing rate and scales the
probability of the expression's BERNOULLI terms to steer the rate toward a
target, within a bounded adjustment factor.
"""

from __future__ import annotations

import re
import string
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

# three-valued logic: True, False, or None for unknown


def _and3(a: bool | None, b: bool | None) -> bool | None:
    if a is False or b is False:
        return False
    if a is None or b is None:
        return None
    return True


def _or3(a: bool | None, b: bool | None) -> bool | None:
    if a is True or b is True:
        return True
    if a is None or b is None:
        return None
    return False


def _not3(a: bool | None) -> bool | None:
    return None if a is None else not a


_CMP_OPS = {
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


@dataclass(frozen=True)
class _Ctx:
    vector: dict[str, float]
    uniforms: Sequence[float]
    adjust: float
    forced: bool


@dataclass(frozen=True)
class Ident:
    name: str


@dataclass(frozen=True)
class Literal:
    value: float


@dataclass(frozen=True)
class Cmp:
    lhs: Ident | Literal
    op: str
    rhs: Ident | Literal

    def eval(self, ctx: _Ctx) -> bool | None:
        if ctx.forced:
            return False
        zero_literal = any(
            isinstance(o, Literal) and o.value == 0.0 for o in (self.lhs, self.rhs)
        )
        vals = []
        for operand in (self.lhs, self.rhs):
            if isinstance(operand, Ident):
                v = ctx.vector[operand.name]
                if v == 0.0 and not zero_literal:
                    return None  # no data yet
                vals.append(v)
            else:
                vals.append(operand.value)
        return _CMP_OPS[self.op](vals[0], vals[1])


@dataclass(frozen=True)
class Bernoulli:
    p: float
    index: int  # position in the expression's uniform draw

    def eval(self, ctx: _Ctx) -> bool | None:
        if ctx.forced:
            return True
        p_eff = min(1.0, self.p / ctx.adjust)
        return bool(ctx.uniforms[self.index] < p_eff)


@dataclass(frozen=True)
class Not:
    item: object

    def eval(self, ctx: _Ctx) -> bool | None:
        return _not3(self.item.eval(ctx))


@dataclass(frozen=True)
class And:
    items: tuple

    def eval(self, ctx: _Ctx) -> bool | None:
        out: bool | None = True
        for item in self.items:
            out = _and3(out, item.eval(ctx))
            if out is False:
                return False
        return out


@dataclass(frozen=True)
class Or:
    items: tuple

    def eval(self, ctx: _Ctx) -> bool | None:
        out: bool | None = False
        for item in self.items:
            out = _or3(out, item.eval(ctx))
            if out is True:
                return True
        return out


class ExpressionError(ValueError):
    """Malformed or unsafe trigger expression."""


_TOKEN_RE = re.compile(
    r"\s*(?:"
    r"(?P<num>[-+]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>==|!=|<=|>=|<|>|\(|\))"
    r")"
)

_KEYWORDS = {"and", "or", "not", "bernoulli"}


def _tokenize(text: str) -> list[tuple[str, str]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            rest = text[pos:].strip()
            if not rest:
                break
            raise ExpressionError(f"cannot tokenize near {rest[:20]!r}")
        pos = m.end()
        if m.group("num") is not None:
            tokens.append(("num", m.group("num")))
        elif m.group("name") is not None:
            name = m.group("name")
            if name.lower() in _KEYWORDS:
                tokens.append(("kw", name.lower()))
            else:
                tokens.append(("name", name))
        else:
            tokens.append(("op", m.group("op")))
    return tokens


class _Parser:
    def __init__(self, text: str) -> None:
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0
        self.n_bernoulli = 0

    def peek(self) -> tuple[str, str] | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self) -> tuple[str, str]:
        tok = self.peek()
        if tok is None:
            raise ExpressionError(f"unexpected end of expression: {self.text!r}")
        self.pos += 1
        return tok

    def expect(self, kind: str, value: str) -> None:
        tok = self.take()
        if tok != (kind, value):
            raise ExpressionError(f"expected {value!r}, got {tok[1]!r} in {self.text!r}")

    def parse(self):
        node = self.parse_or()
        if self.peek() is not None:
            raise ExpressionError(f"trailing input after expression: {self.text!r}")
        return node

    def parse_or(self):
        items = [self.parse_and()]
        while self.peek() == ("kw", "or"):
            self.take()
            items.append(self.parse_and())
        return items[0] if len(items) == 1 else Or(tuple(items))

    def parse_and(self):
        items = [self.parse_not()]
        while self.peek() == ("kw", "and"):
            self.take()
            items.append(self.parse_not())
        return items[0] if len(items) == 1 else And(tuple(items))

    def parse_not(self):
        if self.peek() == ("kw", "not"):
            self.take()
            return Not(self.parse_not())
        return self.parse_atom()

    def parse_atom(self):
        tok = self.peek()
        if tok is None:
            raise ExpressionError(f"unexpected end of expression: {self.text!r}")
        if tok == ("op", "("):
            self.take()
            node = self.parse_or()
            self.expect("op", ")")
            return node
        if tok == ("kw", "bernoulli"):
            self.take()
            self.expect("op", "(")
            p_tok = self.take()
            if p_tok[0] != "num":
                raise ExpressionError(f"BERNOULLI needs a numeric probability, got {p_tok[1]!r}")
            p = float(p_tok[1])
            if not (0.0 <= p <= 1.0):
                raise ExpressionError(f"BERNOULLI probability {p} outside [0, 1]")
            self.expect("op", ")")
            node = Bernoulli(p=p, index=self.n_bernoulli)
            self.n_bernoulli += 1
            return node
        return self.parse_comparison()

    def parse_comparison(self):
        lhs = self.parse_operand()
        tok = self.take()
        if tok[0] != "op" or tok[1] not in _CMP_OPS:
            raise ExpressionError(
                f"expected a comparison operator after operand in {self.text!r}"
            )
        rhs = self.parse_operand()
        return Cmp(lhs=lhs, op=tok[1], rhs=rhs)

    def parse_operand(self):
        tok = self.take()
        if tok[0] == "num":
            return Literal(float(tok[1]))
        if tok[0] == "name":
            return Ident(tok[1])
        raise ExpressionError(f"expected a detector id or number, got {tok[1]!r}")


class Expression:
    """Parsed trigger expression over the detector output vector."""

    def __init__(self, text: str) -> None:
        parser = _Parser(text)
        self.text = text
        self.root = parser.parse()
        self.n_bernoulli = parser.n_bernoulli

    def __repr__(self) -> str:
        return f"Expression({self.text!r})"

    def identifiers(self) -> frozenset[str]:
        found: set[str] = set()

        def walk(node) -> None:
            if isinstance(node, Cmp):
                for o in (node.lhs, node.rhs):
                    if isinstance(o, Ident):
                        found.add(o.name)
            elif isinstance(node, Not):
                walk(node.item)
            elif isinstance(node, (And, Or)):
                for item in node.items:
                    walk(item)

        walk(self.root)
        return frozenset(found)

    def evaluate(
        self,
        vector: dict[str, float],
        uniforms: Sequence[float] = (),
        adjust: float = 1.0,
    ) -> bool | None:
        """Three-valued result: True fires, False and None (unknown) do not."""
        if len(uniforms) < self.n_bernoulli:
            raise ValueError(
                f"expression needs {self.n_bernoulli} uniform draws, got {len(uniforms)}"
            )
        return self.root.eval(_Ctx(vector, uniforms, adjust, forced=False))

    def evaluate_forced(self) -> bool | None:
        """Worst-case idle evaluation: comparisons false, BERNOULLI true."""
        return self.root.eval(_Ctx({}, (), 1.0, forced=True))


def parse_expression(text: str) -> Expression:
    expr = Expression(text)
    if expr.evaluate_forced() is True:
        raise ExpressionError(
            f"expression {text!r} can fire with no detector condition met; "
            "rewrite it without the spontaneous path"
        )
    return expr


# -- actuators ----------------------------------------------------------------


@runtime_checkable
class Actuator(Protocol):
    id: str

    def fire(self, now_ms: int, binding_id: str, payload: str) -> None: ...


def _iso_utc(now_ms: int) -> str:
    dt = datetime.fromtimestamp(now_ms / 1000.0, tz=timezone.utc)
    return dt.isoformat(timespec="milliseconds")


class MessageToFile:
    """Appends one timestamped line per firing to a text file.

    A write failure disables this actuator for the rest of the run (the
    file is considered gone); other actuators are unaffected.
    """

    def __init__(self, id: str, path: str) -> None:
        self.id = id
        self.path = path
        self._dead = False

    def fire(self, now_ms: int, binding_id: str, payload: str) -> None:
        if self._dead:
            raise OSError(f"file actuator {self.id!r} disabled after write failure")
        try:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(f"{_iso_utc(now_ms)}\t{payload}\n")
        except OSError:
            self._dead = True
            raise


class MessageToIp:
    """Queues one datagram line per firing for a host:port endpoint.

    The bench has no live network; datagrams are retained in .sent in wire
    format so tests and the replay tool can inspect exactly what would have
    left the box.
    """

    def __init__(self, id: str, host: str, port: int) -> None:
        if not (0 < port < 65536):
            raise ValueError(f"port {port} out of range")
        self.id = id
        self.host = host
        self.port = port
        self.sent: list[str] = []

    def fire(self, now_ms: int, binding_id: str, payload: str) -> None:
        self.sent.append(f"{_iso_utc(now_ms)}\t{binding_id}\t{payload}\n")


class Relay:
    """Latched on/off output; payload 'on', 'off' or 'toggle'."""

    def __init__(self, id: str) -> None:
        self.id = id
        self.state = False
        self.transitions: list[tuple[int, bool]] = []

    def fire(self, now_ms: int, binding_id: str, payload: str) -> None:
        word = payload.strip().lower()
        if word == "on":
            new = True
        elif word == "off":
            new = False
        elif word == "toggle":
            new = not self.state
        else:
            raise ValueError(f"relay {self.id!r}: bad payload {payload!r}")
        if new != self.state:
            self.state = new
            self.transitions.append((now_ms, new))


class RgbLed:
    """Three latched LED components; payload like 'r=on g=toggle b=off'.

    Assignments are whitespace or comma separated and applied left to
    right, after the whole payload has been validated, so a bad word never
    leaves the register half-written.
    """

    _WORDS = ("on", "off", "toggle")

    def __init__(self, id: str) -> None:
        self.id = id
        self.state = {"r": False, "g": False, "b": False}
        self.transitions: list[tuple[int, str, bool]] = []

    def fire(self, now_ms: int, binding_id: str, payload: str) -> None:
        parts = payload.replace(",", " ").lower().split()
        ops = []
        for part in parts:
            comp, eq, word = part.partition("=")
            if not eq or comp not in self.state or word not in self._WORDS:
                raise ValueError(f"led {self.id!r}: bad assignment {part!r}")
            ops.append((comp, word))
        if not ops:
            raise ValueError(f"led {self.id!r}: empty payload")
        for comp, word in ops:
            new = word == "on" if word != "toggle" else not self.state[comp]
            if new != self.state[comp]:
                self.state[comp] = new
                self.transitions.append((now_ms, comp, new))


class ElectricalStimulation:
    """Feeds a stimulation event back into the plant simulator.

    `target` is wired by the runtime (anything with add_electrical); firing
    unwired is an error so a misassembled bench cannot silently no-op.
    """

    def __init__(self, id: str, intensity: float = 1.0, target=None) -> None:
        if not (0.0 < intensity <= 1.0):
            raise ValueError(
                f"stimulation {id!r}: intensity {intensity} outside (0, 1]"
            )
        self.id = id
        self.intensity = float(intensity)
        self.target = target

    def fire(self, now_ms: int, binding_id: str, payload: str) -> None:
        if self.target is None:
            raise ValueError(f"stimulation {self.id!r} is not wired to a simulator")
        self.target.add_electrical(now_ms, intensity=self.intensity)


class GenericSink:
    """Catch-all endpoint standing in for sound, messaging or home devices:
    every command is retained in memory for inspection."""

    def __init__(self, id: str) -> None:
        self.id = id
        self.commands: list[tuple[int, str, str]] = []

    def fire(self, now_ms: int, binding_id: str, payload: str) -> None:
        self.commands.append((now_ms, binding_id, payload))


# -- bindings and the engine ---------------------------------------------------


@dataclass(frozen=True)
class HomeostatConfig:
    """Rate steering for one binding.

    The firing rate is smoothed with an exponential window (alpha per cycle).
    When it runs above target_per_cycle the adjustment factor grows by step,
    dividing the probability of every BERNOULLI term; below target it shrinks.
    The factor stays inside [lo, hi].
    """

    target_per_cycle: float = 0.0  # 0 disables the homeostat
    alpha: float = 0.05
    step: float = 1.05
    lo: float = 0.1
    hi: float = 10.0

    def __post_init__(self) -> None:
        if self.target_per_cycle < 0:
            raise ValueError("target rate must be >= 0")
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError(f"alpha {self.alpha} outside (0, 1]")
        if self.step <= 1.0:
            raise ValueError(f"step {self.step} must exceed 1")
        if not (0.0 < self.lo <= 1.0 <= self.hi):
            raise ValueError(f"need lo <= 1 <= hi, got [{self.lo}, {self.hi}]")

    @property
    def enabled(self) -> bool:
        return self.target_per_cycle > 0.0


@dataclass(frozen=True)
class Binding:
    """One detector-expression to actuator rule.

    Fires on the rising edge of its expression, then stays quiet for
    cooldown_s.  The payload may interpolate detector values with
    str.format placeholders, e.g. 'z={z1:.2f}'.
    """

    id: str
    expression: Expression
    actuator: Actuator
    payload: str = "fired"
    cooldown_s: float = 0.0
    homeostat: HomeostatConfig = field(default_factory=HomeostatConfig)

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("binding id must be non-empty")
        if self.cooldown_s < 0:
            raise ValueError(f"{self.id}: cooldown must be >= 0")

    def payload_fields(self) -> frozenset[str]:
        fields = set()
        for _, name, _, _ in string.Formatter().parse(self.payload):
            if name:
                fields.add(name.split(".")[0].split("[")[0])
        return frozenset(fields)

    def validate_against(self, detector_ids: frozenset[str] | set[str]) -> None:
        unknown = self.expression.identifiers() - set(detector_ids)
        if unknown:
            raise ValueError(
                f"binding {self.id!r} references unknown detectors: {sorted(unknown)}"
            )
        bad = self.payload_fields() - set(detector_ids)
        if bad:
            raise ValueError(
                f"binding {self.id!r} payload references unknown detectors: {sorted(bad)}"
            )

    def render(self, vector: dict[str, float]) -> str:
        return self.payload.format_map(vector)


@dataclass(frozen=True)
class Firing:
    binding_id: str
    at_ms: int
    payload: str


class _BindingState:
    __slots__ = ("ew_rate", "adjust", "prev_true", "last_fire_ms")

    def __init__(self) -> None:
        self.ew_rate = 0.0
        self.adjust = 1.0
        self.prev_true = False
        self.last_fire_ms: int | None = None


class ActuationEngine:
    """Evaluates every binding once per cycle and drives the actuators.

    Bernoulli draws are seeded per (seed, binding index, timestamp), so a run
    is reproducible sample for sample and bindings cannot influence each
    other's randomness.
    """

    def __init__(self, bindings: Sequence[Binding], seed: int = 0) -> None:
        ids = [b.id for b in bindings]
        dupes = {i for i in ids if ids.count(i) > 1}
        if dupes:
            raise ValueError(f"duplicate binding ids: {sorted(dupes)}")
        self.bindings = tuple(bindings)
        self.seed = int(seed)
        self.dispatch_errors = 0
        self._state = {b.id: _BindingState() for b in bindings}
        self._streams = {b.id: i for i, b in enumerate(bindings)}

    def state_of(self, binding_id: str) -> _BindingState:
        return self._state[binding_id]

    def cycle(self, vector: dict[str, float], now_ms: int) -> list[Firing]:
        firings: list[Firing] = []
        for binding in self.bindings:
            state = self._state[binding.id]
            n = binding.expression.n_bernoulli
            uniforms: Sequence[float] = ()
            if n:
                rng = np.random.default_rng(
                    [self.seed, self._streams[binding.id], int(now_ms)]
                )
                uniforms = rng.uniform(size=n)
            result = binding.expression.evaluate(
                vector, uniforms, adjust=state.adjust
            )
            is_true = result is True
            cooling = (
                state.last_fire_ms is not None
                and (now_ms - state.last_fire_ms) < binding.cooldown_s * 1000.0
            )
            fired = is_true and not state.prev_true and not cooling
            state.prev_true = is_true
            if fired:
                # refractory and homeostat advance even if dispatch fails: the
                # decision to fire was made, only the output misbehaved
                state.last_fire_ms = now_ms
                payload = binding.render(vector)
                try:
                    binding.actuator.fire(now_ms, binding.id, payload)
                except Exception:
                    self.dispatch_errors += 1
                else:
                    firings.append(Firing(binding.id, now_ms, payload))
            self._steer(binding, state, fired)
        return firings

    @staticmethod
    def _steer(binding: Binding, state: _BindingState, fired: bool) -> None:
        cfg = binding.homeostat
        if not cfg.enabled:
            return
        state.ew_rate += cfg.alpha * ((1.0 if fired else 0.0) - state.ew_rate)
        if state.ew_rate > cfg.target_per_cycle:
            state.adjust = min(cfg.hi, state.adjust * cfg.step)
        else:
            state.adjust = max(cfg.lo, state.adjust / cfg.step)
