"""Bit-transmission contexts and protocols.

A sender ``S`` holds a bit and may send it; a receiver ``R`` may send
acknowledgements.  Both keep a clock and a timestamped message history.
Three delivery regimes are provided:

* ``gamma1``: every message arrives within ``max_delay`` rounds;
* ``gamma2``: every message sent at time ``<= T - slack`` arrives by ``T``;
* ``gamma3``: a payload sent at every time of the fairness window
  ``[T-slack-fairness+1, T-slack]`` has a copy sent at or after the window
  start delivered by ``T``.

A message sent at time ``s`` can be received at any time ``n > s``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import partial
from typing import Any, Callable, Mapping, Sequence

from .logic import (
    Believe,
    Const,
    Counterfactual,
    DoAtom,
    Eventually,
    Formula,
    Implies,
    Interpretation,
    Know,
    Not,
    Or,
    Prop,
    PropDef,
)
from .model import (
    SKIP,
    Context,
    EnvState,
    Event,
    FunctionProtocol,
    GlobalState,
    JointAction,
    LazyUniverse,
    LocalState,
    Message,
    ModelError,
    Protocol,
    Run,
)
from .programs import Clause, Program
from .ranking import DeviationRanking, RankingFunction

__all__ = [
    "InvalidSpec",
    "BitContextSpec",
    "make_context",
    "make_protocol",
    "protocol_from_name",
    "SENDBIT",
    "SENDACK",
    "ACK",
    "sender_sends",
    "first_receipt",
    "UnknownName",
    "bit_interpretation",
    "make_program",
    "PROGRAM_NAMES",
    "send_set_program",
    "send_set_family",
    "family_from_name",
    "BiasProfile",
    "bias_profile",
    "is_biased",
    "sender_messages",
    "UnknownClaim",
    "Check",
    "Report",
    "CLAIMS",
    "CLAIM_SUMMARIES",
    "claim_defaults",
    "reproduce",
]

SENDBIT = "sendbit"
SENDACK = "sendack"
ACK = "ack"
CHANNELS = (("R", "S"), ("S", "R"))


class InvalidSpec(ModelError):
    """A context or protocol specification is out of range."""


class UnknownName(ModelError):
    """No built-in program has this name."""


@dataclass(frozen=True)
class BitContextSpec:
    kind: str = "gamma1"
    horizon: int = 8
    max_delay: int = 5
    slack: int = 5
    fairness: int = 2
    delivery: str = "batch"

    @property
    def guard(self) -> int:
        if self.kind == "gamma1":
            return self.max_delay
        if self.kind == "gamma2":
            return self.slack
        return self.slack + self.fairness - 1

    def validate(self) -> None:
        if self.kind not in ("gamma1", "gamma2", "gamma3"):
            raise InvalidSpec(f"unknown context kind {self.kind!r}")
        if self.delivery not in ("batch", "fifo"):
            raise InvalidSpec(f"unknown delivery mode {self.delivery!r}")
        if self.max_delay < 1 or self.slack < 1 or self.fairness < 1:
            raise InvalidSpec("max_delay, slack and fairness must be at least 1")
        if self.horizon <= self.guard:
            raise InvalidSpec(f"horizon {self.horizon} must exceed the guard {self.guard}")

    def params(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind, "horizon": self.horizon}
        if self.kind == "gamma1":
            out["max_delay"] = self.max_delay
        else:
            out["slack"] = self.slack
        if self.kind == "gamma3":
            out["fairness"] = self.fairness
        out["delivery"] = self.delivery
        out["guard"] = self.guard
        return out


def _visible(history: Sequence[Event], t: int) -> tuple[Event, ...]:
    # a send in round t+1 is stamped t and shows up from time t+1 on
    return tuple(
        e for e in history if (e.time < t if e.kind == "sent" else e.time <= t)
    )


def _compatible(loc: LocalState, target: LocalState) -> bool:
    if loc.agent != target.agent or loc.vars != target.vars or loc.clock > target.clock:
        return False
    # histories are appended in time order, so what is visible at a clock is
    # a prefix of the later history
    k = len(loc.history)
    full = target.history
    if loc.history != full[:k]:
        return False
    if k == len(full):
        return True
    e = full[k]
    t = loc.clock
    return not (e.time < t if e.kind == "sent" else e.time <= t)


def _compatible_global(
    max_delay: int | None, g: GlobalState, agent: str, target: LocalState
) -> bool:
    t = g.time
    peer = "R" if agent == "S" else "S"
    future = [e for e in target.history if e.kind == "recv" and e.time > t]
    if max_delay is not None:
        # a pending message must arrive within max_delay rounds of its send
        for msg in g.env.in_transit:
            due = msg.sent_at + max_delay
            if msg.recipient == agent and due <= target.clock:
                if not any(e.time <= due for e in future):
                    return False
    if not future:
        return True
    if peer == "S":
        bit = g.local("S").var("bit")
        if any(e.payload != bit for e in future):
            return False
    pending = sum(1 for msg in g.env.in_transit if msg.recipient == agent)
    received = 0
    for e in sorted(future, key=lambda e: e.time):
        received += 1
        if received > pending + (e.time - t):
            return False
    return True


def _projection(g: GlobalState, agent: str) -> Any:
    # in the universe the peer acts freely, so only the agent's own state,
    # what is on its way to it and the sender's bit shape its future
    pending = tuple(msg for msg in g.env.in_transit if msg.recipient == agent)
    return (g.local(agent), pending, g.local("S").var("bit"))


def make_context(spec: BitContextSpec) -> Context:
    spec.validate()
    T = spec.horizon
    d = spec.max_delay

    def forced(env: EnvState, channel: tuple[str, str]) -> bool:
        if spec.kind != "gamma1":
            return False
        if d == 1:
            return True
        return any(
            (msg.sender, msg.recipient) == channel and msg.sent_at <= env.time + 1 - d
            for msg in env.in_transit
        )

    def cutoff_floor(env: EnvState) -> int:
        return max(0, env.time + 2 - d) if spec.kind == "gamma1" else 0

    def env_protocol(env: EnvState) -> Sequence[Any]:
        if spec.delivery == "batch":
            options: list[tuple[tuple[str, str], ...]] = [()]
            for channel in CHANNELS:
                if forced(env, channel):
                    options = [opt + (channel,) for opt in options]
                else:
                    options = options + [opt + (channel,) for opt in options]
            return tuple(sorted(options, key=lambda o: (len(o), o)))
        per_channel = []
        lo = cutoff_floor(env)
        for channel in CHANNELS:
            cuts = {lo, env.time + 1}
            cuts.update(
                msg.sent_at + 1
                for msg in env.in_transit
                if (msg.sender, msg.recipient) == channel and msg.sent_at + 1 >= lo
            )
            per_channel.append(sorted(cuts))
        return tuple(
            ((CHANNELS[0], a), (CHANNELS[1], b)) for a in per_channel[0] for b in per_channel[1]
        )

    def transition(env_action: Any, acts: tuple[str, ...], g: GlobalState) -> GlobalState:
        m = g.time
        s_loc, r_loc = g.locals
        s_act, r_act = acts
        transit = list(g.env.in_transit)
        s_hist, r_hist = list(s_loc.history), list(r_loc.history)
        if s_act == SENDBIT:
            bit = s_loc.var("bit")
            transit.append(Message("S", "R", bit, m))
            s_hist.append(Event(m, "sent", bit, "R"))
        if r_act == SENDACK:
            transit.append(Message("R", "S", ACK, m))
            r_hist.append(Event(m, "sent", ACK, "S"))
        if spec.delivery == "batch":
            flush = set(env_action)
            delivered = [msg for msg in transit if (msg.sender, msg.recipient) in flush]
        else:
            cut = dict(env_action)
            delivered = [
                msg for msg in transit if msg.sent_at < cut[(msg.sender, msg.recipient)]
            ]
        for msg in delivered:
            ev = Event(m + 1, "recv", msg.payload, msg.sender)
            (r_hist if msg.recipient == "R" else s_hist).append(ev)
        remaining = tuple(msg for msg in transit if msg not in delivered)
        last = JointAction(tuple(delivered), (("S", s_act), ("R", r_act)))
        return GlobalState(
            EnvState(m + 1, last, remaining),
            (
                LocalState("S", m + 1, s_loc.vars, tuple(s_hist)),
                LocalState("R", m + 1, r_loc.vars, tuple(r_hist)),
            ),
        )

    admissible: Callable[[Sequence[GlobalState]], bool] | None = None
    if spec.kind == "gamma2":
        limit = T - spec.slack

        def deadline_met(states: Sequence[GlobalState]) -> bool:
            return all(msg.sent_at > limit for msg in states[-1].env.in_transit)

        admissible = deadline_met

    elif spec.kind == "gamma3":
        hi = T - spec.slack
        lo = hi - spec.fairness + 1

        def tail_delivered(states: Sequence[GlobalState]) -> bool:
            final = states[-1]
            for sender, recipient in CHANNELS:
                sends: dict[Any, set[int]] = {}
                for e in final.local(sender).history:
                    if e.kind == "sent":
                        sends.setdefault(e.payload, set()).add(e.time)
                for payload, times in sends.items():
                    if not all(t in times for t in range(max(lo, 0), hi + 1)):
                        continue
                    late_sent = sum(1 for t in times if t >= lo)
                    pending_late = sum(
                        1
                        for msg in final.env.in_transit
                        if (msg.sender, msg.recipient) == (sender, recipient)
                        and msg.payload == payload
                        and msg.sent_at >= lo
                    )
                    if pending_late == late_sent:
                        return False
            return True

        admissible = tail_delivered

    inits = tuple(
        GlobalState(
            EnvState(0),
            (LocalState("S", 0, (("bit", b),)), LocalState("R", 0)),
        )
        for b in (0, 1)
    )
    return Context(
        name=spec.kind,
        agents=("S", "R"),
        action_sets={"S": frozenset({SKIP, SENDBIT}), "R": frozenset({SKIP, SENDACK})},
        initial_states=inits,
        env_protocol=env_protocol,
        transition=transition,
        horizon=T,
        admissible=admissible,
        guard=spec.guard,
        free_completion=True,
        compatible=_compatible,
        projection=_projection,
        compatible_global=partial(
            _compatible_global, d if spec.kind == "gamma1" else None
        ),
        params=spec.params(),
        rebuild=lambda horizon: make_context(replace(spec, horizon=horizon)),
    )


# ---------------------------------------------------------------------------
# Protocols


def sender_sends(loc: LocalState) -> list[int]:
    """Times at which the sender sent, read from its history."""
    return [e.time for e in loc.history if e.kind == "sent"]


def first_receipt(loc: LocalState) -> int | None:
    times = [e.time for e in loc.history if e.kind == "recv"]
    return min(times) if times else None


def _received(loc: LocalState, payloads: Any) -> bool:
    return any(e.kind == "recv" and e.payload in payloads for e in loc.history)


def _skip_r() -> dict:
    return {}


def make_protocol(name: str, *params: Any) -> Protocol:
    """Build a named bit-transmission protocol.

    ``P1(k, m)``: send at clock ``k`` if the bit is 0, at ``m`` if it is 1.
    ``P2(k, b)``: send at clock ``k`` only if the bit is ``b``.
    ``PI(I)`` or ``PI(I0, I1)``: send at the clocks in ``I`` (per bit).
    ``Pomega``: send at clock 0 and whenever the previous round was a send.
    ``BT``: resend until an ack arrives; the receiver acks received bits.
    ``SKIP``: nobody ever acts.
    """
    if name == "P1":
        k, m = _ints(name, params, 2)
        rule = lambda loc: {SENDBIT} if loc.clock == (k if loc.var("bit") == 0 else m) else {SKIP}
        return FunctionProtocol(f"P1({k},{m})", {"S": rule})
    if name == "P2":
        k, b = _ints(name, params, 2)
        if b not in (0, 1):
            raise InvalidSpec("P2 bit must be 0 or 1")
        rule = lambda loc: {SENDBIT} if loc.clock == k and loc.var("bit") == b else {SKIP}
        return FunctionProtocol(f"P2({k},{b})", {"S": rule})
    if name == "PI":
        if len(params) == 1:
            sets = (frozenset(params[0]), frozenset(params[0]))
            label = _set_label(sets[0])
        elif len(params) == 2:
            sets = (frozenset(params[0]), frozenset(params[1]))
            label = f"{_set_label(sets[0])},{_set_label(sets[1])}"
        else:
            raise InvalidSpec("PI takes one send set or one per bit value")
        if any(t < 0 for s in sets for t in s):
            raise InvalidSpec("send times must be nonnegative")
        rule = lambda loc: {SENDBIT} if loc.clock in sets[loc.var("bit")] else {SKIP}
        return FunctionProtocol(f"P({label})", {"S": rule})
    if name == "Pomega":
        def rule(loc: LocalState) -> set[str]:
            if loc.clock == 0 or (loc.clock - 1) in sender_sends(loc):
                return {SENDBIT}
            return {SKIP}

        return FunctionProtocol("Pomega", {"S": rule})
    if name == "BT":
        return FunctionProtocol(
            "BT",
            {
                "S": lambda loc: {SKIP} if _received(loc, (ACK,)) else {SENDBIT},
                "R": lambda loc: {SENDACK} if _received(loc, (0, 1)) else {SKIP},
            },
        )
    if name == "SKIP":
        return FunctionProtocol("SKIP", {})
    raise InvalidSpec(f"unknown protocol {name!r}")


def _ints(name: str, params: Sequence[Any], n: int) -> list[int]:
    if len(params) != n:
        raise InvalidSpec(f"{name} takes {n} parameters")
    try:
        out = [int(p) for p in params]
    except (TypeError, ValueError) as exc:
        raise InvalidSpec(f"{name} parameters must be integers") from exc
    if any(v < 0 for v in out):
        raise InvalidSpec(f"{name} parameters must be nonnegative")
    return out


def _set_label(s: frozenset[int]) -> str:
    return "{" + ",".join(str(t) for t in sorted(s)) + "}"


def protocol_from_name(text: str) -> Protocol:
    """Parse built-in protocol names such as ``P1:0,2``, ``PI:0,2,4`` or ``Pomega``.

    ``PI`` accepts ``PI:0,2`` (same set for both bits) and ``PI:0,1/2`` (bit
    0 sends at 0 and 1, bit 1 at 2); an empty set is written ``PI:`` or
    ``PI:/``.
    """
    name, _, rest = text.partition(":")
    name = name.strip()
    if name == "PI":
        def parse_set(part: str) -> list[int]:
            part = part.strip()
            if not part:
                return []
            try:
                return [int(x) for x in part.split(",")]
            except ValueError as exc:
                raise InvalidSpec(f"bad send set {part!r}") from exc

        if "/" in rest:
            a, b = rest.split("/", 1)
            return make_protocol("PI", parse_set(a), parse_set(b))
        return make_protocol("PI", parse_set(rest))
    params = [p for p in rest.split(",") if p.strip()] if rest else []
    return make_protocol(name, *params)


# ---------------------------------------------------------------------------
# Interpretation


def _clock_prop(name: str) -> PropDef | None:
    key, _, value = name.partition("=")
    if key != "clock" or not value.isdigit():
        return None
    k = int(value)
    at = lambda loc: loc.clock == k
    return PropDef(lambda g: g.time == k, {"S": at, "R": at})


def bit_interpretation() -> Interpretation:
    """Propositions of the bit-transmission contexts.

    ``bit=0``/``bit=1`` are local to the sender and never change,
    ``recbit`` (the receiver got the bit) is local to the receiver,
    ``recack`` (the sender got an ack) is local to the sender and
    ``clock=k`` is local to both.
    """
    defs = {}
    for b in (0, 1):
        defs[f"bit={b}"] = PropDef(
            lambda g, b=b: g.local("S").var("bit") == b,
            {"S": lambda loc, b=b: loc.var("bit") == b},
            static=True,
        )
    recbit = lambda loc: _received(loc, (0, 1))
    recack = lambda loc: _received(loc, (ACK,))
    defs["recbit"] = PropDef(lambda g: recbit(g.local("R")), {"R": recbit})
    defs["recack"] = PropDef(lambda g: recack(g.local("S")), {"S": recack})
    return Interpretation(defs, _clock_prop)


# ---------------------------------------------------------------------------
# Programs


def _if_else(agent: str, test: Formula, then: str, otherwise: str) -> tuple[Clause, ...]:
    return (Clause(test, then), Clause(Not(test), otherwise))


def _knows_bit(agent: str) -> Formula:
    return Or(Know(agent, Prop("bit=0")), Know(agent, Prop("bit=1")))


SKIP_S = DoAtom("S", SKIP)

_PROGRAM_ALIASES = {
    "Pgbt>": "Pgbt_gt",
    "Pgbt_dB": "Pgbt_dB",
    "PgbtdB": "Pgbt_dB",
    "Pgbt◇B": "Pgbt_dB",
    "BT*": "BTstar",
    "BT*_S": "BTstar",
    "BT=>": "BTarrow",
    "BT'": "BTprime",
    "BT'_S": "BTprime",
}

PROGRAM_NAMES = ("Pgbt_gt", "Pgbt_dB", "BTstar", "BTarrow", "BTprime", "PgbtK", "BT_S", "BT")


def make_program(name: str) -> Program:
    """Built-in bit-transmission programs.

    ``Pgbt_gt``: skip iff S believes that even if it skips, R eventually gets the bit.
    ``Pgbt_dB``: skip iff S believes that even if it skips, R eventually believes the bit.
    ``BTstar``: skip iff S knows R eventually gets the bit.
    ``BTarrow``: skip iff S knows that skipping materially implies R eventually gets the bit.
    ``BTprime``: skip iff S knows R got the bit.
    ``PgbtK``: skip iff S knows R knows the bit.
    ``BT_S``: skip iff an ack arrived.  ``BT`` adds a receiver acking received bits.
    """
    key = _PROGRAM_ALIASES.get(name, name)
    if key == "Pgbt_gt":
        test = Believe("S", Counterfactual(SKIP_S, Eventually(Prop("recbit"))))
        return Program("Pgbt_gt", "cbb", (("S", _if_else("S", test, SKIP, SENDBIT)),))
    if key == "Pgbt_dB":
        from .programs import believes_bit

        test = Believe("S", Counterfactual(SKIP_S, Eventually(believes_bit("R"))))
        return Program("Pgbt_dB", "cbb", (("S", _if_else("S", test, SKIP, SENDBIT)),))
    if key == "BTstar":
        test = Know("S", Eventually(Prop("recbit")))
        return Program("BTstar", "knowledge-based", (("S", _if_else("S", test, SKIP, SENDBIT)),))
    if key == "BTarrow":
        test = Know("S", Implies(SKIP_S, Eventually(Prop("recbit"))))
        return Program("BTarrow", "knowledge-based", (("S", _if_else("S", test, SKIP, SENDBIT)),))
    if key == "BTprime":
        test = Know("S", Prop("recbit"))
        return Program("BTprime", "knowledge-based", (("S", _if_else("S", test, SKIP, SENDBIT)),))
    if key == "PgbtK":
        test = Know("S", _knows_bit("R"))
        return Program("PgbtK", "knowledge-based", (("S", _if_else("S", test, SKIP, SENDBIT)),))
    if key == "BT_S":
        return Program(
            "BT_S", "standard", (("S", _if_else("S", Prop("recack"), SKIP, SENDBIT)),)
        )
    if key == "BT":
        return Program(
            "BT",
            "standard",
            (
                ("S", _if_else("S", Prop("recack"), SKIP, SENDBIT)),
                ("R", _if_else("R", Prop("recbit"), SENDACK, SKIP)),
            ),
        )
    raise UnknownName(f"unknown program {name!r}")


def send_set_program(times: Sequence[int], name: str | None = None) -> Program:
    """The standard program sending exactly at the clocks in ``times``."""
    test: Formula = Const(False)
    for t in sorted(set(times), reverse=True):
        test = Prop(f"clock={t}") if test == Const(False) else Or(Prop(f"clock={t}"), test)
    label = name or "PI" + _set_label(frozenset(times))
    return Program(label, "standard", (("S", (Clause(test, SENDBIT),)),))


def send_set_family(window: int, per_bit: bool = True) -> list[Protocol]:
    """Every ``P(I0, I1)`` (or ``P(I)``) with send sets inside ``0..window-1``.

    Members are ordered by the bitmask of ``I0`` then ``I1``.
    """
    subsets = [
        frozenset(t for t in range(window) if mask >> t & 1) for mask in range(1 << window)
    ]
    if not per_bit:
        return [make_protocol("PI", s) for s in subsets]
    return [make_protocol("PI", a, b) for a in subsets for b in subsets]


def family_from_name(text: str, ctx: Context) -> list[Protocol]:
    """``sendsets:N`` (per-bit sets inside ``0..N-1``), ``sendsets1:N``
    (one set for both bits) or ``window`` (per-bit sets inside the context window)."""
    name, _, arg = text.partition(":")
    if name == "window":
        return send_set_family(ctx.window)
    if name in ("sendsets", "sendsets1"):
        try:
            n = int(arg)
        except ValueError as exc:
            raise InvalidSpec(f"bad family size {arg!r}") from exc
        if n < 0 or n > 6:
            raise InvalidSpec("family size must be between 0 and 6")
        return send_set_family(n, per_bit=name == "sendsets")
    raise InvalidSpec(f"unknown protocol family {text!r}")


# ---------------------------------------------------------------------------
# Bias


@dataclass(frozen=True)
class BiasProfile:
    """``rows[n] = (n, k0, k1)``: least rank of a run with bit ``b`` where R has received nothing by ``n``."""

    rows: tuple[tuple[int, float, float], ...]
    ranking: str = ""

    def kappa(self, n: int, b: int) -> float:
        return self.rows[n][1 + b]

    def biased_at(self) -> list[int]:
        return [n for n, k0, k1 in self.rows if k0 != k1]


def _silent(g: GlobalState) -> bool:
    return not any(e.kind == "recv" for e in g.local("R").history)


def _silent_min_rank(kappa: RankingFunction, ctx: Context, universe: Any, n: int, b: int) -> float:
    root = lambda g0: g0.local("S").var("bit") == b
    quiet = LocalState("R", n)
    hook = ctx.compatible_global

    def node_ok(g: GlobalState) -> bool:
        # prune nodes whose pending messages must reach R by time n
        return _silent(g) and (hook is None or hook(g, "R", quiet))

    if isinstance(universe, LazyUniverse) and isinstance(kappa, DeviationRanking):
        sat = kappa.saturate
        limit = n * len(ctx.agents)
        for budget in range(limit + 1):
            if sat is not None and budget >= sat:
                found = next(iter(universe.prefixes(n, math.inf, None, root, node_ok)), None)
                return sat if found is not None else math.inf
            for prefix, dev in universe.prefixes(n, budget, None, root, node_ok):
                if dev + universe.completion_cost(prefix) <= budget:
                    return budget
        return math.inf
    best = math.inf
    for run in universe.runs:
        if root(run[0]) and all(_silent(run[k]) for k in range(n + 1)):
            best = min(best, kappa.rank(run))
    return best


def bias_profile(kappa: RankingFunction, ctx: Context, universe: Any = None) -> BiasProfile:
    """Least ranks of receiver-silent runs per time and bit value, for times ``0..T``."""
    if universe is None:
        if not isinstance(kappa, DeviationRanking):
            raise ValueError("bias_profile needs a universe for this ranking")
        universe = kappa.default_universe()
    rows = tuple(
        (n, _silent_min_rank(kappa, ctx, universe, n, 0), _silent_min_rank(kappa, ctx, universe, n, 1))
        for n in range(ctx.horizon + 1)
    )
    return BiasProfile(rows, getattr(kappa, "name", ""))


def is_biased(profile: BiasProfile) -> bool:
    return bool(profile.biased_at())


def sender_messages(run: Run) -> int:
    """Number of bit messages the sender sends in ``run``."""
    return sum(1 for e in run[-1].local("S").history if e.kind == "sent")


# ---------------------------------------------------------------------------
# Claim reproduction


class UnknownClaim(ModelError):
    """``reproduce`` does not know this claim id."""


@dataclass(frozen=True)
class Check:
    """One verdict inside a report; ``passed`` iff ``observed == expected``."""

    name: str
    observed: Any
    expected: Any
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.observed == self.expected

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "observed": _jsonable(self.observed),
            "expected": _jsonable(self.expected),
            "passed": self.passed,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class Report:
    """Outcome of reproducing one claim at one or more horizons.

    ``runs`` pairs a horizon label with the checks made there.  The claim
    passes when every check passes and every run observed the same values.
    """

    claim: str
    params: tuple[tuple[str, Any], ...]
    runs: tuple[tuple[str, tuple[Check, ...]], ...]
    counterexamples: tuple[dict[str, Any], ...] = ()
    notes: tuple[str, ...] = ()

    @property
    def horizons(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.runs)

    @property
    def checks(self) -> tuple[Check, ...]:
        return tuple(c for _, checks in self.runs for c in checks)

    @property
    def stable(self) -> bool:
        seen = [[(c.name, _jsonable(c.observed)) for c in checks] for _, checks in self.runs]
        return all(s == seen[0] for s in seen)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks) and self.stable

    def to_dict(self) -> dict[str, Any]:
        return {
            "claim": self.claim,
            "passed": self.passed,
            "stable": self.stable,
            "params": {k: _jsonable(v) for k, v in self.params},
            "horizons": list(self.horizons),
            "runs": [
                {"horizon": label, "checks": [c.to_dict() for c in checks]}
                for label, checks in self.runs
            ],
            "counterexamples": [dict(c) for c in self.counterexamples],
            "notes": list(self.notes),
        }

    def render(self) -> str:
        params = " ".join(f"{k}={_jsonable(v)}" for k, v in self.params)
        lines = [f"{'PASS' if self.passed else 'FAIL'} {self.claim} {params}".rstrip()]
        for label, checks in self.runs:
            for c in checks:
                mark = "ok  " if c.passed else "FAIL"
                text = f"  [{label}] {mark} {c.name}: {_jsonable(c.observed)}"
                if not c.passed:
                    text += f" (expected {_jsonable(c.expected)})"
                if c.detail:
                    text += f"  {c.detail}"
                lines.append(text)
        if not self.stable:
            lines.append("  verdicts differ between horizons")
        for cex in self.counterexamples:
            lines.append(
                f"  {cex['role']} (T={cex['context']['horizon']}): {cex['protocol']} vs {cex['program']} at "
                f"{cex['agent']} {cex['local']} expected {cex['expected']} got {cex['actual']}"
            )
        lines.extend(f"  note: {n}" for n in self.notes)
        return "\n".join(lines)


def _jsonable(v: Any) -> Any:
    if isinstance(v, (tuple, list)):
        return [_jsonable(x) for x in v]
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    return v


# The claim ids are the names the reproduction suite has always used.
CLAIMS = (
    "run-shapes",
    "pbR-imp",
    "zeta-char1",
    "zeta-char21",
    "zeta-char2",
    "procra",
    "zeta-char3",
    "safe",
    "imp-thm",
    "no-impl-BTstar",
    "no-impl-BTarrow",
    "genthm",
    "knowledge-axiom",
    "b-imp",
    "weakimp",
    "dsl-roundtrip",
)

_DEFAULTS: dict[str, dict[str, Any]] = {
    "run-shapes": {"kind": "gamma1", "horizon": 8, "max_delay": 5},
    "pbR-imp": {"kind": "gamma1", "horizon": 10, "max_delay": 5, "pairs": "0,0;0,2;1,3"},
    "zeta-char1": {"kind": "gamma1", "horizon": 10, "max_delay": 5, "pairs": "0,0;1,1"},
    "zeta-char21": {"kind": "gamma1", "horizon": 10, "max_delay": 5, "k": 0, "m": 2, "diagonal": "0,1"},
    "zeta-char2": {"kind": "gamma2", "horizon": 10, "slack": 5, "k": 0, "m": 2},
    "procra": {"kind": "gamma3", "horizon": 7, "slack": 2, "fairness": 2},
    "zeta-char3": {"kind": "gamma3", "horizon": 9, "slack": 2, "fairness": 2},
    "safe": {},
    "imp-thm": {},
    "no-impl-BTstar": {"kind": "gamma1", "horizon": 8, "max_delay": 5, "family": "sendsets:3"},
    "no-impl-BTarrow": {"kind": "gamma1", "horizon": 8, "max_delay": 5, "family": "sendsets:3"},
    "genthm": {"seeds": 100, "formulas": 3, "depth": 3, "seed": 0},
    "knowledge-axiom": {"seeds": 100, "formulas": 3, "depth": 3, "seed": 0},
    "b-imp": {"kind": "gamma1", "horizon": 6, "max_delay": 2, "rank": "characteristic"},
    "weakimp": {"kind": "gamma1", "horizon": 6, "max_delay": 2, "rank": "characteristic"},
    "dsl-roundtrip": {"count": 1000, "seed": 0},
}

# claims whose checks span several contexts; they are re-run with every
# context horizon shifted instead of at explicit horizons
_SHIFTED = {"safe", "imp-thm", "genthm", "knowledge-axiom"}
_NO_HORIZON = {"dsl-roundtrip"}
_SPEC_KEYS = ("kind", "horizon", "max_delay", "slack", "fairness", "delivery")

def _rank_generator(name: str):
    from .ranking import characteristic_rank, deviation_count_rank

    if name == "characteristic":
        return characteristic_rank
    if name == "deviations":
        return deviation_count_rank
    raise InvalidSpec(f"unknown ranking {name!r} (use characteristic or deviations)")


def _spec(params: Mapping[str, Any], horizon: int | None = None) -> BitContextSpec:
    kw = {k: params[k] for k in _SPEC_KEYS if k in params}
    for k in ("horizon", "max_delay", "slack", "fairness"):
        if k in kw:
            kw[k] = int(kw[k])
    if horizon is not None:
        kw["horizon"] = horizon
    spec = BitContextSpec(**kw)
    spec.validate()
    return spec


_ZETAS: dict[tuple[BitContextSpec, str], Any] = {}


def _zeta(spec: BitContextSpec, rank: str = "characteristic"):
    from .ranking import ExtendedContext

    key = (spec, rank)
    if key not in _ZETAS:
        _ZETAS[key] = ExtendedContext(make_context(spec), bit_interpretation(), rank=_rank_generator(rank))
    return _ZETAS[key]


def _program(name: str) -> Program:
    from .programs import program_to_belief

    if name.endswith("^B"):
        return program_to_belief(make_program(name[:-2]))
    return make_program(name)


_VERDICTS: dict[tuple, Any] = {}


def _verdict(spec: BitContextSpec, protocol: Protocol, program: str, rank: str = "characteristic"):
    """De facto implementation verdict, memoized per context, protocol name, program and ranking."""
    from .programs import de_facto_implements

    key = (spec, str(protocol), program, rank)
    if key not in _VERDICTS:
        _VERDICTS[key] = de_facto_implements(protocol, _program(program), _zeta(spec, rank))
    return _VERDICTS[key]


def _cex_dict(role: str, spec: BitContextSpec, protocol: Protocol, program: str, verdict) -> dict[str, Any]:
    from .model import format_local, format_state

    cex = verdict.counterexample
    prog = _program(program)
    tests = [str(c.test) for c in prog.for_agent(cex.agent)]
    point = None
    if cex.point is not None:
        point = {
            "time": cex.point.time,
            "run": [format_state(g) for g in cex.point.run],
        }
    return {
        "role": role,
        "context": spec.params(),
        "protocol": str(protocol),
        "program": program,
        "agent": cex.agent,
        "local": format_local(cex.local) if cex.local is not None else None,
        "clock": cex.local.clock if cex.local is not None else None,
        "expected": sorted(cex.expected),
        "actual": sorted(cex.actual),
        "point": point,
        "formula": tests[0] if tests else None,
        "note": cex.note,
    }


class _Collector:
    """Gathers checks for one horizon and counterexamples for the report."""

    def __init__(self, cexs: list[dict[str, Any]], record: bool):
        self.checks: list[Check] = []
        self.cexs = cexs
        self.record = record

    def add(self, name: str, observed: Any, expected: Any, detail: str = "") -> bool:
        c = Check(name, observed, expected, detail)
        self.checks.append(c)
        return c.passed

    def implements(
        self,
        spec: BitContextSpec,
        protocol: Protocol,
        program: str,
        expected: bool,
        rank: str = "characteristic",
    ):
        v = _verdict(spec, protocol, program, rank)
        ok = self.add(f"{protocol} implements {program}", v.holds, expected, v.guard_note)
        if v.counterexample is not None and (self.record or not ok):
            role = "witness" if ok else "failure"
            self.cexs.append(_cex_dict(role, spec, protocol, program, v))
        return v


def _pairs(params: Mapping[str, Any]) -> list[tuple[int, int]]:
    if "k" in params and "m" in params and "pairs" not in params:
        return [(int(params["k"]), int(params["m"]))]
    text = str(params.get("pairs", ""))
    out = []
    for chunk in text.split(";"):
        if chunk.strip():
            a, _, b = chunk.partition(",")
            out.append((int(a), int(b)))
    if not out:
        raise InvalidSpec("no (k,m) pairs given")
    return out


def _claim_run_shapes(p, spec, col):
    from .model import generate_runs

    ctx = make_context(spec)
    d = spec.max_delay
    for name, (k, x), count in (("P1", (0, 0), 10), ("P2", (0, 0), 6)):
        proto = make_protocol(name, k, x)
        runs = generate_runs(proto, ctx)
        col.add(f"{proto} run count", len(runs), count)
        shapes = sorted((r[0].local("S").var("bit"), first_receipt(r[-1].local("R"))) for r in runs)
        if name == "P1":
            want = sorted((b, n) for b in (0, 1) for n in range((k if b == 0 else x) + 1, (k if b == 0 else x) + d + 1))
        else:
            want = sorted([(x, n) for n in range(k + 1, k + d + 1)] + [(1 - x, None)])
        col.add(f"{proto} runs by (bit, first receipt)", shapes == want, True)


def _claim_pbr_imp(p, spec, col):
    for k, m in _pairs(p):
        col.implements(spec, make_protocol("P1", k, m), "Pgbt_gt", True)
    col.implements(spec, make_protocol("PI", []), "Pgbt_gt", False)


def _claim_zeta_char1(p, spec, col):
    for k, b in _pairs(p):
        proto = make_protocol("P2", k, b)
        col.implements(spec, proto, "Pgbt_dB", True)
        col.implements(spec, proto, "Pgbt_gt", False)


def _claim_zeta_char21(p, spec, col):
    from .ranking import characteristic_rank

    ctx = _zeta(spec).ctx
    diagonal = [int(x) for x in str(p.get("diagonal", "")).split(",") if x.strip()]
    for j in diagonal:
        proto = make_protocol("P1", j, j)
        col.implements(spec, proto, "Pgbt_dB", True)
        profile = bias_profile(characteristic_rank(proto, ctx), ctx)
        col.add(f"sigma_xi({proto}) biased", is_biased(profile), False)
    k, m = int(p.get("k", 0)), int(p.get("m", 2))
    if k < m:
        proto = make_protocol("P1", k, m)
        v = col.implements(spec, proto, "Pgbt_dB", False)
        cex = v.counterexample
        where = None if cex is None else (cex.agent, cex.local.clock, cex.local.var("bit"))
        col.add(f"{proto} first disagreement (agent, clock, bit)", where, ("S", m, 1))
        profile = bias_profile(characteristic_rank(proto, ctx), ctx)
        n = m + spec.max_delay - 1
        col.add(f"kappa({n},1) under sigma_xi({proto})", profile.kappa(n, 1), 0)
        col.add(f"kappa({n},1) < kappa({n},0)", profile.kappa(n, 1) < profile.kappa(n, 0), True)


def _claim_zeta_char2(p, spec, col):
    proto = make_protocol("P1", int(p.get("k", 0)), int(p.get("m", 2)))
    col.implements(spec, proto, "Pgbt_gt", True)
    col.implements(spec, proto, "Pgbt_dB", True)


def _claim_procra(p, spec, col):
    ctx = _zeta(spec).ctx
    family = send_set_family(ctx.window, per_bit=False)
    for prog in ("Pgbt_gt", "Pgbt_dB"):
        found = [str(P) for P in family if _verdict(spec, P, prog).holds]
        col.add(
            f"send-set protocols implementing {prog}",
            len(found),
            0,
            f"{len(family)} sets inside 0..{ctx.window - 1}" + (f"; found {found}" if found else ""),
        )


def _claim_zeta_char3(p, spec, col):
    from .model import generate_runs

    ctx = _zeta(spec).ctx
    omega = make_protocol("Pomega")
    full = make_protocol("PI", range(spec.horizon + 1))
    col.add(
        "Pomega and P(0..T) have the same runs",
        set(generate_runs(omega, ctx)) == set(generate_runs(full, ctx)),
        True,
    )
    for prog in ("Pgbt_gt", "Pgbt_dB"):
        col.implements(spec, omega, prog, True)
        v = _verdict(spec, full, prog)
        ok = col.add(f"P(0..T) implements {prog}", v.holds, False, v.guard_note)
        if v.counterexample is not None:
            col.cexs.append(_cex_dict("witness" if ok else "failure", spec, full, prog, v))


# implementations established by the claims above, at their default horizons
_IMPLEMENTERS = (
    ({"kind": "gamma1", "horizon": 10, "max_delay": 5}, ("P1", 0, 0), "Pgbt_gt"),
    ({"kind": "gamma1", "horizon": 10, "max_delay": 5}, ("P1", 0, 2), "Pgbt_gt"),
    ({"kind": "gamma1", "horizon": 10, "max_delay": 5}, ("P1", 1, 3), "Pgbt_gt"),
    ({"kind": "gamma1", "horizon": 10, "max_delay": 5}, ("P2", 0, 0), "Pgbt_dB"),
    ({"kind": "gamma1", "horizon": 10, "max_delay": 5}, ("P2", 1, 1), "Pgbt_dB"),
    ({"kind": "gamma1", "horizon": 10, "max_delay": 5}, ("P1", 0, 0), "Pgbt_dB"),
    ({"kind": "gamma1", "horizon": 10, "max_delay": 5}, ("P1", 1, 1), "Pgbt_dB"),
    ({"kind": "gamma2", "horizon": 10, "slack": 5}, ("P1", 0, 2), "Pgbt_gt"),
    ({"kind": "gamma2", "horizon": 10, "slack": 5}, ("P1", 0, 2), "Pgbt_dB"),
    ({"kind": "gamma3", "horizon": 9, "slack": 2, "fairness": 2}, ("Pomega",), "Pgbt_gt"),
    ({"kind": "gamma3", "horizon": 9, "slack": 2, "fairness": 2}, ("Pomega",), "Pgbt_dB"),
)


def _implementers(shift: int, kinds: Sequence[str] | None = None):
    for kw, proto_args, prog in _IMPLEMENTERS:
        if kinds is not None and kw["kind"] not in kinds:
            continue
        spec = _spec(kw, kw["horizon"] + shift)
        yield spec, make_protocol(*proto_args), prog


def _claim_safe(p, shift, col):
    from .logic import Eventually, eval as eval_formula
    from .model import Point
    from .programs import believes_bit

    goal = Eventually(believes_bit("R"))
    for spec, proto, prog in _implementers(shift):
        v = col.implements(spec, proto, prog, True)
        system = _zeta(spec).system(proto)
        bad = [r for r in system.runs if not eval_formula(system, Point(r, 0), goal)]
        col.add(
            f"{spec.kind} {proto} ({prog}): eventually R believes the bit on every run",
            not bad and v.holds,
            True,
            f"{len(system.runs)} runs, T={spec.horizon}",
        )


def _claim_imp_thm(p, shift, col):
    from .model import generate_runs

    for spec, proto, prog in _implementers(shift, ("gamma1", "gamma2")):
        col.implements(spec, proto, prog, True)
        runs = generate_runs(proto, _zeta(spec).ctx)
        most = max((sender_messages(r) for r in runs), default=0)
        col.add(f"{spec.kind} {proto} ({prog}): at most one sender message per run", most <= 1, True, f"max {most}")


def _family(p, spec_base: BitContextSpec) -> list[Protocol]:
    text = str(p.get("family", "window"))
    if text == "window":
        return send_set_family(make_context(spec_base).window)
    return family_from_name(text, make_context(spec_base))


def _no_impl(program: str):
    def claim(p, spec, col):
        from .programs import fixed_point_iterate

        family = _family(p, _spec(p))
        found = [str(P) for P in family if _verdict(spec, P, program).holds]
        col.add(f"family members implementing {program}", len(found), 0, f"{len(family)} candidates")
        zeta = _zeta(spec)
        # seeds: the silent member and the one sending at every family clock
        for seed in (family[0], family[-1]):
            res = fixed_point_iterate(seed, make_program(program), zeta)
            col.add(f"iteration from {seed}", res.kind, "cycle", f"period {res.period}")

    return claim


def _random_corpus(p, shift: int):
    import random as _random

    from .logic import random_formula, random_interpretation
    from .model import random_context, random_protocol

    base = int(p.get("seed", 0))
    for i in range(int(p.get("seeds", 100))):
        seed = base + i
        ctx = random_context(seed, horizon_slack=2)
        if shift:
            ctx = ctx.with_horizon(ctx.horizon + shift)
        interp = random_interpretation(ctx)
        rng = _random.Random(seed)
        props = sorted(interp.defs)
        formulas = [
            random_formula(rng, props, ctx.agents, int(p.get("depth", 3)), temporal=True, next_op=False)
            for _ in range(int(p.get("formulas", 3)))
        ]
        yield seed, ctx, interp, random_protocol(ctx, seed), formulas, rng


def _claim_genthm(p, shift, col):
    from .logic import eval as eval_formula, eval_knowledge, to_belief
    from .model import Point
    from .ranking import ExtendedContext

    for rank in ("characteristic", "deviations"):
        total = agree = 0
        first_bad = ""
        for seed, ctx, interp, proto, formulas, _ in _random_corpus(p, shift):
            zeta = ExtendedContext(ctx, interp, rank=_rank_generator(rank))
            ksys = zeta.interpreted(proto)
            bsys = zeta.system(proto, ksys.runs)
            for phi in formulas:
                psi = to_belief(phi)
                for run in ksys.runs:
                    for m in range(len(run)):
                        total += 1
                        k = eval_knowledge(ksys, Point(run, m), phi)
                        if k == eval_formula(bsys, Point(run, m), psi):
                            agree += 1
                        elif not first_bad:
                            first_bad = f"seed {seed}, time {m}: {phi}"
        col.add(f"K/B agreement under {rank} ranking", agree == total, True, f"{agree}/{total} points {first_bad}".rstrip())


def _claim_knowledge_axiom(p, shift, col):
    from .logic import Believe, Implies, eval as eval_formula, to_belief
    from .model import Point
    from .ranking import ExtendedContext

    for rank in ("characteristic", "deviations"):
        total = good = 0
        first_bad = ""
        for seed, ctx, interp, proto, formulas, rng in _random_corpus(p, shift):
            zeta = ExtendedContext(ctx, interp, rank=_rank_generator(rank))
            system = zeta.system(proto)
            for phi in formulas:
                psi = to_belief(phi)
                axiom = Implies(Believe(rng.choice(ctx.agents), psi), psi)
                for run in system.runs:
                    for m in range(len(run)):
                        total += 1
                        if eval_formula(system, Point(run, m), axiom):
                            good += 1
                        elif not first_bad:
                            first_bad = f"seed {seed}, time {m}: {axiom}"
        col.add(f"B[i] phi -> phi under {rank} ranking", good == total, True, f"{good}/{total} points {first_bad}".rstrip())


def _bimp_family(p) -> list[Protocol]:
    base = _spec(p)
    return _family(p, base)


def _claim_b_imp(p, spec, col):
    rank = str(p.get("rank", "characteristic"))
    _rank_generator(rank)
    family = _bimp_family(p)
    kimpl, disagree = [], []
    for P in family:
        kv = _verdict(spec, P, "BTprime", rank).holds
        bv = _verdict(spec, P, "BTprime^B", rank).holds
        if kv:
            kimpl.append(str(P))
        if kv != bv:
            disagree.append(str(P))
    col.add("family members where K and B verdicts differ", len(disagree), 0, f"{len(family)} candidates {disagree or ''}".rstrip())
    col.add("K-version implementers", kimpl, kimpl)


def _claim_weakimp(p, spec, col):
    from .programs import weakimp_holds

    rank = str(p.get("rank", "characteristic"))
    family = _bimp_family(p)
    zeta = _zeta(spec, rank)
    checked = []
    for prog in ("BTprime", "BTprime^B"):
        failures = []
        for P in family:
            if not _verdict(spec, P, prog, rank).holds:
                continue
            checked.append((prog, str(P)))
            if not weakimp_holds(P, _program(prog), zeta):
                failures.append(str(P))
        col.add(
            f"implementers of {prog} whose derived protocol does not implement it",
            len(failures),
            0,
            f"checked {[q for g, q in checked if g == prog]} {failures or ''}".rstrip(),
        )


def _claim_dsl_roundtrip(p, col):
    import random as _random
    from importlib import resources

    from . import dsl

    rng = _random.Random(int(p.get("seed", 0)))
    count = int(p.get("count", 1000))
    bad = 0
    for _ in range(count):
        phi = _random_ast(rng, 4)
        if dsl.parse_formula(dsl.format_formula(phi)) != phi:
            bad += 1
    col.add("formulas whose printed text parses back differently", bad, 0, f"{count} generated")
    mismatched = []
    for name in PROGRAM_NAMES:
        text = resources.files("cbbcheck").joinpath("data", f"{name}.cbp").read_text(encoding="utf-8")
        if dsl.parse_program(dsl.SourceText(text, f"{name}.cbp")) != make_program(name):
            mismatched.append(name)
    col.add("shipped programs differing from the built-ins", mismatched, [], f"{len(PROGRAM_NAMES)} files")


def _random_ast(rng, depth: int) -> Formula:
    """A random formula over every node kind the surface syntax can express."""
    from .logic import Always, And, Eventually, Last, Next

    agents = ("S", "R", "a")
    actions = ("skip", "sendbit", "x")
    if depth <= 0 or rng.random() < 0.25:
        pick = rng.randrange(5)
        if pick == 0:
            return Const(rng.random() < 0.5)
        if pick == 1:
            return DoAtom(rng.choice(agents), rng.choice(actions))
        if pick == 2:
            return Last(rng.choice(agents), rng.choice(actions))
        if pick == 3:
            return Prop(f"{rng.choice(('bit', 'clock', 'v'))}={rng.randrange(3)}")
        return Prop(rng.choice(("p", "q", "recbit", "recack", "x_1")))
    op = rng.randrange(11)
    sub = lambda: _random_ast(rng, depth - 1)
    if op == 0:
        return Not(sub())
    if op == 1:
        return And(sub(), sub())
    if op == 2:
        return Or(sub(), sub())
    if op == 3:
        return Implies(sub(), sub())
    if op == 4:
        return Next(sub())
    if op == 5:
        return Eventually(sub())
    if op == 6:
        return Always(sub())
    if op == 7:
        return Know(rng.choice(agents), sub())
    if op == 8:
        return Believe(rng.choice(agents), sub())
    return Counterfactual(DoAtom(rng.choice(agents), rng.choice(actions)), sub())


_SINGLE = {
    "run-shapes": _claim_run_shapes,
    "pbR-imp": _claim_pbr_imp,
    "zeta-char1": _claim_zeta_char1,
    "zeta-char21": _claim_zeta_char21,
    "zeta-char2": _claim_zeta_char2,
    "procra": _claim_procra,
    "zeta-char3": _claim_zeta_char3,
    "no-impl-BTstar": _no_impl("BTstar"),
    "no-impl-BTarrow": _no_impl("BTarrow"),
    "b-imp": _claim_b_imp,
    "weakimp": _claim_weakimp,
}
_MULTI = {
    "safe": _claim_safe,
    "imp-thm": _claim_imp_thm,
    "genthm": _claim_genthm,
    "knowledge-axiom": _claim_knowledge_axiom,
}

CLAIM_SUMMARIES = {
    "run-shapes": "run counts of P1(0,0) and P2(0,0) under bounded delay",
    "pbR-imp": "P1(k,m) implements Pgbt_gt under bounded delay",
    "zeta-char1": "P2(k,b) implements Pgbt_dB but not Pgbt_gt",
    "zeta-char21": "P1(k,k) implements Pgbt_dB, P1(k,m) with k<m does not; bias of its ranking",
    "zeta-char2": "P1(0,2) implements both programs under eventual delivery",
    "procra": "no send-set protocol implements either program under fairness",
    "zeta-char3": "Pomega implements both programs under fairness, P(0..T) does not",
    "safe": "every implementation makes R eventually believe the bit",
    "imp-thm": "implementations send at most one message per run",
    "no-impl-BTstar": "no send-set protocol implements BTstar; iteration cycles",
    "no-impl-BTarrow": "no send-set protocol implements BTarrow; iteration cycles",
    "genthm": "knowledge and belief versions agree on random contexts",
    "knowledge-axiom": "B[i] phi -> phi on the protocol's runs",
    "b-imp": "K and B versions of BTprime have the same implementers",
    "weakimp": "derived protocols of implementers implement the program",
    "dsl-roundtrip": "text formats round-trip; shipped programs match the built-ins",
}


def claim_defaults(claim_id: str) -> dict[str, Any]:
    if claim_id not in _DEFAULTS:
        raise UnknownClaim(f"unknown claim {claim_id!r}; known: {', '.join(CLAIMS)}")
    return dict(_DEFAULTS[claim_id])


def reproduce(
    claim_id: str,
    params: Mapping[str, Any] | None = None,
    *,
    horizons: Sequence[int] | None = None,
    stability: bool = True,
    witnesses: bool = True,
) -> Report:
    """Check one claim and return a structured report.

    By default the claim runs at its horizon ``T`` and again at ``T+2``.
    ``horizons`` replaces that list; claims spanning several contexts take
    shifts through the ``shifts`` parameter instead.  With ``witnesses``
    the counterexamples behind expected negative verdicts are kept too.
    """
    merged = claim_defaults(claim_id)
    merged.update(params or {})
    cexs: list[dict[str, Any]] = []
    runs: list[tuple[str, tuple[Check, ...]]] = []
    notes: list[str] = []
    if claim_id in _NO_HORIZON:
        col = _Collector(cexs, witnesses)
        _claim_dsl_roundtrip(merged, col)
        runs.append(("-", tuple(col.checks)))
        notes.append("no horizon involved")
    elif claim_id in _MULTI:
        if horizons is not None:
            raise InvalidSpec(f"{claim_id} spans several contexts; pass shifts=... instead of horizons")
        shifts = [int(s) for s in str(merged.get("shifts", "0,2" if stability else "0")).split(",")]
        merged["shifts"] = ",".join(str(s) for s in shifts)
        for s in shifts:
            col = _Collector(cexs, witnesses)
            _MULTI[claim_id](merged, s, col)
            runs.append((f"T+{s}", tuple(col.checks)))
    else:
        base = _spec(merged)
        merged["horizon"] = base.horizon
        hs = list(horizons) if horizons else ([base.horizon, base.horizon + 2] if stability else [base.horizon])
        for h in hs:
            col = _Collector(cexs, witnesses)
            _SINGLE[claim_id](merged, _spec(merged, h), col)
            runs.append((f"T={h}", tuple(col.checks)))
    unique = []
    for c in cexs:
        if c not in unique:
            unique.append(c)
    return Report(
        claim_id,
        tuple(sorted(merged.items())),
        tuple(runs),
        tuple(unique),
        tuple(notes),
    )
