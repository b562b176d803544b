"""Programs, derived protocols and implementation checks.

A program gives each agent an ordered list of clauses ``if test do
action``.  At a local state the derived protocol offers the actions of
every clause whose test holds, or ``skip`` when none does.  Tests of
standard programs are propositional, tests of knowledge-based programs are
built from ``K[i]`` formulas and tests of cbb programs from ``B[i]``
formulas, where ``i`` is the agent running the program.

Implementation checks only compare protocols at clocks up to the context
window (``horizon - guard``); beyond it a derived protocol falls back to
the protocol it was derived for.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

from .logic import (
    And,
    Believe,
    Const,
    Eventually,
    ExtendedSystem,
    Formula,
    IllegalInput,
    Implies,
    InterpretedSystem,
    Interpretation,
    Know,
    Not,
    Or,
    Prop,
    eval as eval_formula,
    in_knowledge_language,
    subformulas,
    to_belief,
)
from .model import (
    SKIP,
    Context,
    Explosion,
    LazyUniverse,
    LocalState,
    Point,
    Protocol,
    Run,
    generate_runs,
)
from .ranking import ExtendedContext, is_deviation_compatible

__all__ = [
    "KINDS",
    "ProgramError",
    "InvalidProgram",
    "IncompatibleInterpretation",
    "NonCompatibleRanking",
    "Clause",
    "Program",
    "Counterexample",
    "Verdict",
    "DerivedProtocol",
    "derive_protocol_std",
    "derive_protocol",
    "program_to_belief",
    "reachable_states",
    "protocols_equivalent",
    "compare_protocols",
    "de_facto_implements",
    "implements",
    "weakimp_holds",
    "search_implementations",
    "FixedPointResult",
    "fixed_point_iterate",
    "believes_bit",
    "solves_bit_transmission",
    "protocol_table",
]

KINDS = ("standard", "knowledge-based", "cbb")


class ProgramError(Exception):
    """Base class for program errors."""


class InvalidProgram(ProgramError):
    """A program violates the test-form rules of its kind."""


class IncompatibleInterpretation(ProgramError):
    """A standard test uses a proposition that is not local to its agent."""


class NonCompatibleRanking(ProgramError):
    """The ranking does not give rank 0 exactly to the protocol's runs."""


@dataclass(frozen=True)
class Clause:
    test: Formula
    action: str


def _boolean_leaves(phi: Formula) -> Iterable[Formula]:
    if isinstance(phi, Not):
        yield from _boolean_leaves(phi.sub)
    elif isinstance(phi, (And, Or, Implies)):
        yield from _boolean_leaves(phi.left)
        yield from _boolean_leaves(phi.right)
    else:
        yield phi


@dataclass(frozen=True)
class Program:
    """A (joint) program: ``clauses`` pairs each agent with its clause list."""

    name: str
    kind: str
    clauses: tuple[tuple[str, tuple[Clause, ...]], ...]

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise InvalidProgram(f"unknown program kind {self.kind!r}")
        agents = [a for a, _ in self.clauses]
        if len(set(agents)) != len(agents):
            raise InvalidProgram("an agent appears twice")
        for agent, clauses in self.clauses:
            for clause in clauses:
                self._check_test(agent, clause.test)

    def _check_test(self, agent: str, test: Formula) -> None:
        for leaf in _boolean_leaves(test):
            if isinstance(leaf, Const):
                continue
            if self.kind == "standard":
                ok = isinstance(leaf, Prop)
            elif self.kind == "knowledge-based":
                ok = (
                    isinstance(leaf, Know)
                    and leaf.agent == agent
                    and in_knowledge_language(leaf.sub)
                )
            else:
                ok = isinstance(leaf, Believe) and leaf.agent == agent
            if not ok:
                raise InvalidProgram(
                    f"{self.name}: test of {agent} not allowed in a {self.kind} program: {leaf}"
                )

    @classmethod
    def build(
        cls, name: str, kind: str, clauses: Mapping[str, Sequence[Clause]]
    ) -> "Program":
        return cls(name, kind, tuple((a, tuple(cs)) for a, cs in clauses.items()))

    @property
    def agents(self) -> tuple[str, ...]:
        return tuple(a for a, _ in self.clauses)

    def for_agent(self, agent: str) -> tuple[Clause, ...]:
        for a, clauses in self.clauses:
            if a == agent:
                return clauses
        return ()


def program_to_belief(program: Program, name: str | None = None) -> Program:
    """The cbb program obtained by replacing every ``K[i]`` with ``B[i]``."""
    if program.kind != "knowledge-based":
        raise IllegalInput("only knowledge-based programs have a belief version")
    return Program(
        name or f"{program.name}^B",
        "cbb",
        tuple(
            (a, tuple(Clause(to_belief(c.test), c.action) for c in cs))
            for a, cs in program.clauses
        ),
    )


@dataclass(frozen=True)
class Counterexample:
    """Where two protocols (or a goal) disagree.

    ``expected`` is what the program prescribes and ``actual`` what the
    protocol does.
    """

    agent: str
    local: LocalState | None
    expected: frozenset[str]
    actual: frozenset[str]
    point: Point | None = None
    note: str = ""


@dataclass(frozen=True)
class Verdict:
    holds: bool
    counterexample: Counterexample | None = None
    guard_note: str = ""
    details: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.holds == (self.counterexample is not None):
            raise ValueError("a verdict carries a counterexample exactly when it fails")

    def __bool__(self) -> bool:
        return self.holds


# ---------------------------------------------------------------------------
# Derived protocols


class DerivedProtocol(Protocol):
    """The protocol a program prescribes when its tests are read in a system.

    ``window`` is the last clock at which tests are evaluated; at later
    clocks the ``fallback`` protocol is used when given.  Local states where
    a knowledge or belief test had nothing to range over are collected in
    ``vacuous_states``.
    """

    def __init__(
        self,
        program: Program,
        system: Any,
        *,
        interp: Interpretation | None = None,
        window: int | None = None,
        fallback: Protocol | None = None,
        name: str | None = None,
    ):
        self.program = program
        self.system = system
        self.interp = interp if interp is not None else system.interp
        self.window = window
        self.fallback = fallback
        self.name = name or f"{program.name}@{fallback.name if fallback else 'sys'}"
        self.vacuous_states: set[tuple[str, LocalState]] = set()
        self._memo: dict[tuple[str, LocalState], frozenset[str]] = {}

    def actions(self, agent: str, local: LocalState) -> frozenset[str]:
        key = (agent, local)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        if self.window is not None and self.fallback is not None and local.clock > self.window:
            acts = self.fallback.actions(agent, local)
        else:
            acts = self._evaluate(agent, local)
        self._memo[key] = acts
        return acts

    def _evaluate(self, agent: str, local: LocalState) -> frozenset[str]:
        clauses = self.program.for_agent(agent)
        if not clauses:
            return frozenset({SKIP})
        if self.program.kind == "standard":
            holds = lambda t: _holds_propositional(t, self.interp, agent, local)
        else:
            ev = self.system.evaluator
            holds = lambda t: ev.holds_local(t, agent, local)
        acts = frozenset(c.action for c in clauses if holds(c.test))
        if self.program.kind != "standard" and self._vacuous(agent, local):
            self.vacuous_states.add((agent, local))
        return acts or frozenset({SKIP})

    def _vacuous(self, agent: str, local: LocalState) -> bool:
        system = self.system
        if isinstance(system, ExtendedSystem) and self.program.kind == "cbb":
            # reuses the min-rank class computed while evaluating the tests
            return system.rank.min_rank(system.universe, agent, local) == math.inf
        return not system.has_local(agent, local)


def _holds_propositional(
    phi: Formula, interp: Interpretation, agent: str, local: LocalState
) -> bool:
    if isinstance(phi, Const):
        return phi.value
    if isinstance(phi, Prop):
        return interp.local_holds(phi.name, agent, local)
    if isinstance(phi, Not):
        return not _holds_propositional(phi.sub, interp, agent, local)
    a = _holds_propositional(phi.left, interp, agent, local)
    if isinstance(phi, And):
        return a and _holds_propositional(phi.right, interp, agent, local)
    if isinstance(phi, Or):
        return a or _holds_propositional(phi.right, interp, agent, local)
    return (not a) or _holds_propositional(phi.right, interp, agent, local)


def derive_protocol_std(program: Program, interp: Interpretation) -> DerivedProtocol:
    """The protocol of a standard program under an interpretation."""
    if program.kind != "standard":
        raise IllegalInput(f"{program.name} is not a standard program")
    for agent, clauses in program.clauses:
        for clause in clauses:
            for f in subformulas(clause.test):
                if isinstance(f, Prop) and not interp.is_local(f.name, agent):
                    raise IncompatibleInterpretation(
                        f"proposition {f.name!r} is not local to {agent}"
                    )
    return DerivedProtocol(program, None, interp=interp, name=program.name)


def derive_protocol(
    program: Program,
    system: InterpretedSystem | ExtendedSystem,
    *,
    window: int | None = None,
    fallback: Protocol | None = None,
) -> DerivedProtocol:
    """The protocol ``program`` prescribes when its tests are read in ``system``."""
    if program.kind == "standard":
        derived = derive_protocol_std(program, system.interp)
        derived.window, derived.fallback = window, fallback
        return derived
    if program.kind == "cbb" and not isinstance(system, ExtendedSystem):
        raise IllegalInput("belief tests need an extended system")
    return DerivedProtocol(program, system, window=window, fallback=fallback)


# ---------------------------------------------------------------------------
# Comparing protocols


def reachable_states(
    runs: Sequence[Run], ctx: Context, window: int | None = None
) -> list[tuple[str, LocalState, Point]]:
    """Distinct ``(agent, local state)`` pairs on ``runs`` at clocks up to ``window``.

    Each pair comes with the first point where it occurs.
    """
    limit = ctx.horizon + 1 if window is None else min(window + 1, ctx.horizon + 1)
    seen: dict[tuple[str, LocalState], Point] = {}
    for run in runs:
        for m in range(min(limit, len(run))):
            for loc in run[m].locals:
                seen.setdefault((loc.agent, loc), Point(run, m))
    return [(a, loc, p) for (a, loc), p in seen.items()]


def compare_protocols(
    protocol: Protocol,
    reference: Protocol,
    states: Iterable[tuple[str, LocalState, Point | None]],
) -> Counterexample | None:
    """First state where ``protocol`` and ``reference`` prescribe different actions."""
    for agent, loc, point in states:
        actual = protocol.actions(agent, loc)
        expected = reference.actions(agent, loc)
        if actual != expected:
            return Counterexample(agent, loc, expected, actual, point)
    return None


def protocols_equivalent(
    p: Protocol, q: Protocol, ctx: Context, window: int | None = None
) -> bool:
    """Same runs, and same actions at every local state on those runs.

    ``window`` restricts the state comparison to clocks up to it.
    """
    runs_p = generate_runs(p, ctx)
    if set(runs_p) != set(generate_runs(q, ctx)):
        return False
    return compare_protocols(p, q, reachable_states(runs_p, ctx, window)) is None


def _guard_note(ctx: Context) -> str:
    return (
        f"compared clocks 0..{ctx.window} "
        f"(horizon {ctx.horizon}, guard {ctx.guard})"
    )


def _system_for(program: Program, zeta: ExtendedContext, protocol: Protocol, runs):
    if program.kind == "cbb":
        return zeta.system(protocol, runs)
    return zeta.interpreted(protocol, runs)


def _check_ranking(program: Program, zeta: ExtendedContext, protocol: Protocol) -> None:
    if program.kind == "cbb" and not is_deviation_compatible(zeta.rank, protocol, zeta.ctx):
        raise NonCompatibleRanking(
            f"ranking {zeta.rank_name} is not deviation compatible for {protocol}"
        )


def de_facto_implements(
    protocol: Protocol, program: Program, zeta: ExtendedContext
) -> Verdict:
    """Whether ``protocol`` agrees with what ``program`` prescribes in the system it generates."""
    ctx = zeta.ctx
    _check_ranking(program, zeta, protocol)
    runs = generate_runs(protocol, ctx)
    system = _system_for(program, zeta, protocol, runs)
    derived = derive_protocol(program, system, window=ctx.window, fallback=protocol)
    states = reachable_states(runs, ctx, ctx.window)
    cex = compare_protocols(protocol, derived, states)
    details = {
        "protocol": str(protocol),
        "program": program.name,
        "runs": len(runs),
        "states_compared": len(states),
        "ranking": zeta.rank_name if program.kind == "cbb" else None,
    }
    return Verdict(cex is None, cex, _guard_note(ctx), details)


def _universe_states(zeta: ExtendedContext, protocol: Protocol) -> list[tuple[str, LocalState, None]]:
    ctx = zeta.ctx
    if zeta.backend == "explicit":
        universe: Any = zeta.explicit_universe()
    else:
        universe = LazyUniverse(ctx, protocol)
    out = []
    for agent in ctx.agents:
        out.extend((agent, loc, None) for loc in universe.local_states(agent, ctx.window))
    return out


def implements(protocol: Protocol, program: Program, zeta: ExtendedContext) -> Verdict:
    """Whether ``protocol`` equals the derived protocol at every universe state in the window."""
    ctx = zeta.ctx
    _check_ranking(program, zeta, protocol)
    runs = generate_runs(protocol, ctx)
    system = _system_for(program, zeta, protocol, runs)
    derived = derive_protocol(program, system, window=ctx.window, fallback=protocol)
    states = _universe_states(zeta, protocol)
    cex = compare_protocols(protocol, derived, states)
    details = {
        "protocol": str(protocol),
        "program": program.name,
        "states_compared": len(states),
        "vacuous_states": len(derived.vacuous_states),
    }
    return Verdict(cex is None, cex, _guard_note(ctx), details)


def weakimp_holds(protocol: Protocol, program: Program, zeta: ExtendedContext) -> bool:
    """If ``protocol`` de facto implements ``program``, the protocol derived from it implements it."""
    if not de_facto_implements(protocol, program, zeta).holds:
        return True
    ctx = zeta.ctx
    runs = generate_runs(protocol, ctx)
    system = _system_for(program, zeta, protocol, runs)
    derived = derive_protocol(program, system, window=ctx.window, fallback=protocol)
    return implements(derived, program, zeta).holds


def search_implementations(
    family: Iterable[Protocol],
    program: Program,
    zeta: ExtendedContext,
    cap: int = 4096,
) -> list[Protocol]:
    """Family members that de facto implement ``program``, in family order."""
    members = list(family)
    if len(members) > cap:
        raise Explosion("candidate family", len(members), cap)
    return [p for p in members if de_facto_implements(p, program, zeta).holds]


@dataclass(frozen=True)
class FixedPointResult:
    """Outcome of iterating protocol derivation.

    ``kind`` is ``"fixed_point"``, ``"cycle"`` or ``"exhausted"``;
    ``protocols`` lists the iterates starting with the seed.
    """

    kind: str
    protocols: tuple[Protocol, ...]
    period: int = 0

    @property
    def fixed_point(self) -> Protocol | None:
        return self.protocols[-1] if self.kind == "fixed_point" else None

    @property
    def cycle(self) -> tuple[Protocol, ...]:
        if self.kind != "cycle":
            return ()
        return self.protocols[-self.period :]


def _signature(protocol: Protocol, ctx: Context, runs: Sequence[Run]) -> frozenset:
    return frozenset(
        (a, loc, protocol.actions(a, loc)) for a, loc, _ in reachable_states(runs, ctx, ctx.window)
    )


def fixed_point_iterate(
    seed: Protocol, program: Program, zeta: ExtendedContext, max_iter: int = 10
) -> FixedPointResult:
    """Iterate ``P -> derive_protocol(program, system of P)`` until a repeat.

    Iterates are compared on the states their runs reach within the window.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    ctx = zeta.ctx
    current = seed
    runs = generate_runs(current, ctx)
    history = [_signature(current, ctx, runs)]
    protocols = [current]
    for _ in range(max_iter):
        system = _system_for(program, zeta, current, runs)
        nxt = derive_protocol(program, system, window=ctx.window, fallback=current)
        runs = generate_runs(nxt, ctx)
        sig = _signature(nxt, ctx, runs)
        if sig in history:
            period = len(history) - history.index(sig)
            kind = "fixed_point" if period == 1 else "cycle"
            return FixedPointResult(kind, tuple(protocols), period)
        history.append(sig)
        protocols.append(nxt)
        current = nxt
    return FixedPointResult("exhausted", tuple(protocols))


# ---------------------------------------------------------------------------
# The bit-transmission goal


def believes_bit(agent: str = "R") -> Formula:
    """``(bit=0 & B[agent] bit=0) | (bit=1 & B[agent] bit=1)``."""
    return Or(
        And(Prop("bit=0"), Believe(agent, Prop("bit=0"))),
        And(Prop("bit=1"), Believe(agent, Prop("bit=1"))),
    )


def solves_bit_transmission(
    program: Program,
    zeta: ExtendedContext,
    family: Iterable[Protocol],
    goal: Formula | None = None,
) -> Verdict:
    """Every family member implementing ``program`` makes the receiver eventually believe the bit.

    The goal is checked at time 0 of every rank-0 run, that is, every run
    of the implementing protocol.
    """
    goal = Eventually(believes_bit("R")) if goal is None else goal
    checked = []
    for protocol in family:
        if not de_facto_implements(protocol, program, zeta).holds:
            continue
        checked.append(str(protocol))
        system = zeta.system(protocol)
        for run in system.runs:
            if not eval_formula(system, Point(run, 0), goal):
                cex = Counterexample(
                    "R",
                    run[0].local("R"),
                    frozenset(),
                    frozenset(),
                    Point(run, 0),
                    f"{protocol}: goal fails",
                )
                return Verdict(False, cex, _guard_note(zeta.ctx), {"implementations": checked})
    return Verdict(True, None, _guard_note(zeta.ctx), {"implementations": checked})


def protocol_table(
    protocol: Protocol, states: Iterable[tuple[str, LocalState]]
) -> list[tuple[str, LocalState, tuple[str, ...]]]:
    """``(agent, local state, sorted actions)`` rows for export."""
    return [(a, loc, tuple(sorted(protocol.actions(a, loc)))) for a, loc in states]
