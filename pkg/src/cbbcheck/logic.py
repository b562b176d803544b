"""Formulas and their evaluation over interpreted and extended systems.

The language has propositions, boolean connectives, the temporal operators
next (``X``), eventually (``F``) and always (``G``), knowledge ``K[i]``,
belief ``B[i]``, the recording atoms ``last(i,a)`` and ``do(i,a)``, and the
counterfactual conditional ``do(i,a) > phi``.

Temporal operators are bounded by the horizon: ``F`` and ``G`` range over
``[m, T]``, and ``X``/``do`` at time ``T`` raise :class:`HorizonError`
instead of returning a truth value.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field, fields
from functools import lru_cache
from typing import Any, Callable, Iterable, Iterator, Mapping, Sequence

from .model import Context, GlobalState, LocalState, Point, Run

__all__ = [
    "LogicError",
    "HorizonError",
    "UnsupportedAntecedent",
    "IllegalInput",
    "UnknownProposition",
    "Formula",
    "Const",
    "Prop",
    "Not",
    "And",
    "Or",
    "Implies",
    "Next",
    "Eventually",
    "Always",
    "Know",
    "Believe",
    "DoAtom",
    "Last",
    "Counterfactual",
    "TRUE",
    "FALSE",
    "PropDef",
    "Interpretation",
    "InterpretedSystem",
    "ExtendedSystem",
    "Evaluator",
    "eval_knowledge",
    "eval",
    "extension",
    "to_belief",
    "is_state_formula",
    "in_knowledge_language",
    "modal_depth",
    "subformulas",
    "random_interpretation",
    "random_formula",
]


class LogicError(Exception):
    """Base class for evaluation errors."""


class HorizonError(LogicError):
    """A next-step operator was evaluated at the horizon."""


class UnsupportedAntecedent(LogicError):
    """A counterfactual antecedent is not a do-atom."""


class IllegalInput(LogicError):
    """A formula is outside the language an operation accepts."""


class UnknownProposition(LogicError):
    """A proposition has no interpretation."""


# ---------------------------------------------------------------------------
# Formula AST


class Formula:
    """Base class of formula nodes; nodes cache their hash."""

    __slots__ = ()

    def __str__(self) -> str:
        from .dsl import DslError, format_formula

        try:
            return format_formula(self)
        except DslError:
            return repr(self)


def _node(cls):
    cls = dataclass(frozen=True)(cls)
    names = [f.name for f in fields(cls) if f.name != "_hash"]

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "_hash", hash((cls.__name__,) + tuple(getattr(self, n) for n in names))
        )

    def __hash__(self) -> int:
        return self._hash

    cls.__post_init__ = __post_init__
    cls.__hash__ = __hash__
    return cls


@_node
class Const(Formula):
    value: bool
    _hash: int = field(init=False, repr=False, compare=False, default=0)


@_node
class Prop(Formula):
    name: str
    _hash: int = field(init=False, repr=False, compare=False, default=0)


@_node
class Not(Formula):
    sub: Formula
    _hash: int = field(init=False, repr=False, compare=False, default=0)


@_node
class And(Formula):
    left: Formula
    right: Formula
    _hash: int = field(init=False, repr=False, compare=False, default=0)


@_node
class Or(Formula):
    left: Formula
    right: Formula
    _hash: int = field(init=False, repr=False, compare=False, default=0)


@_node
class Implies(Formula):
    left: Formula
    right: Formula
    _hash: int = field(init=False, repr=False, compare=False, default=0)


@_node
class Next(Formula):
    sub: Formula
    _hash: int = field(init=False, repr=False, compare=False, default=0)


@_node
class Eventually(Formula):
    sub: Formula
    _hash: int = field(init=False, repr=False, compare=False, default=0)


@_node
class Always(Formula):
    sub: Formula
    _hash: int = field(init=False, repr=False, compare=False, default=0)


@_node
class Know(Formula):
    agent: str
    sub: Formula
    _hash: int = field(init=False, repr=False, compare=False, default=0)


@_node
class Believe(Formula):
    agent: str
    sub: Formula
    _hash: int = field(init=False, repr=False, compare=False, default=0)


@_node
class DoAtom(Formula):
    """``do(i,a)``: agent ``i`` performs ``a`` in the next round."""

    agent: str
    action: str
    _hash: int = field(init=False, repr=False, compare=False, default=0)


@_node
class Last(Formula):
    """``last(i,a)``: agent ``i`` performed ``a`` in the previous round."""

    agent: str
    action: str
    _hash: int = field(init=False, repr=False, compare=False, default=0)


@_node
class Counterfactual(Formula):
    antecedent: Formula
    consequent: Formula
    _hash: int = field(init=False, repr=False, compare=False, default=0)


TRUE = Const(True)
FALSE = Const(False)

_UNARY = (Not, Next, Eventually, Always)
_BINARY = (And, Or, Implies)


def children(phi: Formula) -> tuple[Formula, ...]:
    if isinstance(phi, _UNARY) or isinstance(phi, (Know, Believe)):
        return (phi.sub,)
    if isinstance(phi, _BINARY):
        return (phi.left, phi.right)
    if isinstance(phi, Counterfactual):
        return (phi.antecedent, phi.consequent)
    return ()


def subformulas(phi: Formula) -> Iterator[Formula]:
    yield phi
    for c in children(phi):
        yield from subformulas(c)


@lru_cache(maxsize=None)
def is_state_formula(phi: Formula) -> bool:
    """True when the truth value at ``(r, m)`` depends only on ``r(m)``."""
    if isinstance(phi, (Const, Prop, Last, Know, Believe)):
        return True
    if isinstance(phi, (Not, And, Or, Implies)):
        return all(is_state_formula(c) for c in children(phi))
    return False


def in_knowledge_language(phi: Formula) -> bool:
    return not any(isinstance(f, (Believe, Counterfactual)) for f in subformulas(phi))


def modal_depth(phi: Formula) -> int:
    """Nesting depth of all non-atomic operators."""
    kids = children(phi)
    if not kids:
        return 0
    return 1 + max(modal_depth(c) for c in kids)


def to_belief(phi: Formula) -> Formula:
    """Replace every ``K[i]`` by ``B[i]``."""
    if not in_knowledge_language(phi):
        raise IllegalInput("to_belief expects a formula without belief or counterfactuals")
    return _to_belief(phi)


def _to_belief(phi: Formula) -> Formula:
    if isinstance(phi, Know):
        return Believe(phi.agent, _to_belief(phi.sub))
    if isinstance(phi, _UNARY):
        return type(phi)(_to_belief(phi.sub))
    if isinstance(phi, _BINARY):
        return type(phi)(_to_belief(phi.left), _to_belief(phi.right))
    return phi


# ---------------------------------------------------------------------------
# Interpretations


@dataclass(frozen=True, eq=False)
class PropDef:
    """How to evaluate one proposition.

    ``local`` maps each agent the proposition is local to onto an
    evaluator over that agent's local state.  ``static`` marks propositions
    whose value never changes along a run.
    """

    evaluate: Callable[[GlobalState], bool]
    local: Mapping[str, Callable[[LocalState], bool]] = field(default_factory=dict)
    static: bool = False


@dataclass(frozen=True, eq=False)
class Interpretation:
    defs: Mapping[str, PropDef] = field(default_factory=dict)
    resolver: Callable[[str], PropDef | None] | None = None

    def lookup(self, name: str) -> PropDef:
        d = self.defs.get(name)
        if d is None and self.resolver is not None:
            d = self.resolver(name)
        if d is None:
            raise UnknownProposition(f"no interpretation for proposition {name!r}")
        return d

    def holds(self, name: str, g: GlobalState) -> bool:
        return bool(self.lookup(name).evaluate(g))

    def is_local(self, name: str, agent: str) -> bool:
        try:
            return agent in self.lookup(name).local
        except UnknownProposition:
            return False

    def local_holds(self, name: str, agent: str, local: LocalState) -> bool:
        d = self.lookup(name)
        if agent not in d.local:
            raise IllegalInput(f"proposition {name!r} is not local to {agent}")
        return bool(d.local[agent](local))

    def is_static(self, name: str) -> bool:
        try:
            return self.lookup(name).static
        except UnknownProposition:
            return False


def random_interpretation(ctx: Context) -> Interpretation:
    """Propositions for contexts built by :func:`cbbcheck.model.random_context`.

    ``v<agent>`` is the agent's private bit, ``x<agent>`` holds when the agent
    did ``x`` last round and ``e`` is the environment bit.
    """
    defs: dict[str, PropDef] = {}
    for a in ctx.agents:
        defs[f"v{a}"] = PropDef(
            lambda g, a=a: g.local(a).var("v") == 1,
            {a: lambda loc: loc.var("v") == 1},
            static=True,
        )
        defs[f"x{a}"] = PropDef(
            lambda g, a=a: g.env.last is not None and g.env.last.action(a) == "x"
        )
    defs["e"] = PropDef(lambda g: g.env.data[0] == 1)
    return Interpretation(defs)


# ---------------------------------------------------------------------------
# Systems


class InterpretedSystem:
    """A set of runs with an interpretation; supports knowledge only."""

    def __init__(self, runs: Sequence[Run], interp: Interpretation, horizon: int):
        self.runs = list(runs)
        self.interp = interp
        self.horizon = horizon
        self._index: dict[tuple[str, LocalState], list[tuple[Run, int]]] = {}
        for run in self.runs:
            for m, g in enumerate(run):
                for loc in g.locals:
                    self._index.setdefault((loc.agent, loc), []).append((run, m))
        self._evaluator: Evaluator | None = None

    @property
    def evaluator(self) -> "Evaluator":
        if self._evaluator is None:
            self._evaluator = Evaluator(self)
        return self._evaluator

    def points(self) -> Iterator[tuple[Run, int]]:
        for run in self.runs:
            for m in range(len(run)):
                yield run, m

    def knowledge_points(
        self, agent: str, local: LocalState, need_paths: bool, root_filter=None
    ) -> Iterable[tuple[Run, int]]:
        pts = self._index.get((agent, local), [])
        if root_filter is None:
            return pts
        return [(r, m) for r, m in pts if root_filter(r[0])]

    def local_states(self, agent: str) -> list[LocalState]:
        return [loc for (a, loc) in self._index if a == agent]

    def has_local(self, agent: str, local: LocalState) -> bool:
        return (agent, local) in self._index

    def belief_points(self, agent, local, need_paths, root_filter=None):
        raise IllegalInput("belief needs an extended system")

    def closest(self, agent, action, run, m):
        raise IllegalInput("counterfactuals need an extended system")


@dataclass(eq=False)
class ExtendedSystem:
    """A universe of runs with an order assignment and a ranking.

    ``universe`` is an explicit or lazy universe backend, ``order`` answers
    closest-point queries for do-antecedents and ``rank`` answers min-rank
    queries.  ``runs`` are the runs of the protocol the system was built
    for, when known.
    """

    universe: Any
    interp: Interpretation
    order: Any
    rank: Any
    runs: Sequence[Run] = ()
    _evaluator: "Evaluator | None" = field(default=None, init=False, repr=False)

    @property
    def horizon(self) -> int:
        return self.universe.horizon

    @property
    def ctx(self) -> Context:
        return self.universe.ctx

    @property
    def evaluator(self) -> "Evaluator":
        if self._evaluator is None:
            self._evaluator = Evaluator(self)
        return self._evaluator

    def knowledge_points(self, agent, local, need_paths, root_filter=None):
        return self.universe.points(agent, local, need_paths, root_filter)

    def belief_points(self, agent, local, need_paths, root_filter=None):
        return self.rank.belief_points(self.universe, agent, local, need_paths, root_filter)

    def closest(self, agent, action, run, m):
        return self.order.closest(agent, action, run, m)

    def has_local(self, agent: str, local: LocalState) -> bool:
        return self.universe.has_local(agent, local)


# ---------------------------------------------------------------------------
# Evaluation


def _static_value(phi: Formula, interp: Interpretation, g0: GlobalState) -> bool | None:
    """Value of a formula built from static propositions, else None."""
    if isinstance(phi, Const):
        return phi.value
    if isinstance(phi, Prop):
        return interp.holds(phi.name, g0) if interp.is_static(phi.name) else None
    if isinstance(phi, Not):
        v = _static_value(phi.sub, interp, g0)
        return None if v is None else not v
    if isinstance(phi, (And, Or, Implies)):
        a = _static_value(phi.left, interp, g0)
        b = _static_value(phi.right, interp, g0)
        if a is None or b is None:
            return None
        if isinstance(phi, And):
            return a and b
        if isinstance(phi, Or):
            return a or b
        return (not a) or b
    return None


class Evaluator:
    """Memoizing evaluator bound to one system.

    Results of state formulas are cached by global state, results of
    knowledge and belief by local state, and everything else by
    ``(run, time)``.
    """

    def __init__(self, system: Any):
        self.system = system
        self.interp: Interpretation = system.interp
        self.T: int = system.horizon
        self._memo: dict[Any, bool] = {}
        self._static: dict[Formula, bool] = {}

    def holds(self, phi: Formula, run: Run, m: int) -> bool:
        if m < 0 or m > self.T:
            raise IllegalInput(f"time {m} outside 0..{self.T}")
        if is_state_formula(phi):
            key = (phi, run[m])
        else:
            if len(run) <= self.T:
                raise LogicError("temporal formula evaluated on a run prefix")
            key = (phi, run, m)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        result = self._eval(phi, run, m)
        self._memo[key] = result
        return result

    def holds_at(self, phi: Formula, point: Point) -> bool:
        return self.holds(phi, point.run, point.time)

    def _eval(self, phi: Formula, run: Run, m: int) -> bool:
        if isinstance(phi, Const):
            return phi.value
        if isinstance(phi, Prop):
            return self.interp.holds(phi.name, run[m])
        if isinstance(phi, Not):
            return not self.holds(phi.sub, run, m)
        if isinstance(phi, And):
            return self.holds(phi.left, run, m) and self.holds(phi.right, run, m)
        if isinstance(phi, Or):
            return self.holds(phi.left, run, m) or self.holds(phi.right, run, m)
        if isinstance(phi, Implies):
            return (not self.holds(phi.left, run, m)) or self.holds(phi.right, run, m)
        if isinstance(phi, Next):
            if m >= self.T:
                raise HorizonError(f"next-step operator evaluated at the horizon {self.T}")
            return self.holds(phi.sub, run, m + 1)
        if isinstance(phi, Eventually):
            return any(self.holds(phi.sub, run, k) for k in range(m, self.T + 1))
        if isinstance(phi, Always):
            return all(self.holds(phi.sub, run, k) for k in range(m, self.T + 1))
        if isinstance(phi, Last):
            last = run[m].env.last
            return last is not None and last.action(phi.agent) == phi.action
        if isinstance(phi, DoAtom):
            if m >= self.T:
                raise HorizonError(f"do({phi.agent},{phi.action}) evaluated at the horizon {self.T}")
            return run[m + 1].env.last.action(phi.agent) == phi.action
        if isinstance(phi, (Know, Believe)):
            return self.modal(phi, run[m].local(phi.agent))
        if isinstance(phi, Counterfactual):
            return self._counterfactual(phi, run, m)
        raise IllegalInput(f"unknown formula node {phi!r}")

    def modal(self, phi: Know | Believe, local: LocalState) -> bool:
        """Truth of ``K[i] psi`` or ``B[i] psi`` at any point where ``i`` has ``local``."""
        key = (phi, local)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        sub = phi.sub
        need_paths = not is_state_formula(sub)
        root_filter = None
        g0 = self._any_initial()
        if g0 is not None and _static_value(sub, self.interp, g0) is not None:
            # only runs starting where sub is false can refute it
            root_filter = lambda g0: not _static_value(sub, self.interp, g0)
        if isinstance(phi, Know):
            pts = self.system.knowledge_points(phi.agent, local, need_paths, root_filter)
        else:
            pts = self.system.belief_points(phi.agent, local, need_paths, root_filter)
        result = all(self.holds(sub, r, k) for r, k in pts)
        self._memo[key] = result
        return result

    def _any_initial(self) -> GlobalState | None:
        sys = self.system
        if hasattr(sys, "universe"):
            return sys.universe.ctx.initial_states[0]
        return sys.runs[0][0] if sys.runs else None

    def _counterfactual(self, phi: Counterfactual, run: Run, m: int) -> bool:
        ante = phi.antecedent
        if not isinstance(ante, DoAtom):
            raise UnsupportedAntecedent(
                f"counterfactual antecedent must be do(i,a), got {ante!r}"
            )
        if m >= self.T:
            raise HorizonError("counterfactual evaluated at the horizon")
        does = run[m + 1].env.last.action(ante.agent) == ante.action
        if does:
            pts = self.system.closest(ante.agent, ante.action, run, m)
            return all(self.holds(phi.consequent, r, k) for r, k in pts)
        key = (phi, "close", run.states[: m + 1])
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        pts = self.system.closest(ante.agent, ante.action, run, m)
        result = all(self.holds(phi.consequent, r, k) for r, k in pts)
        self._memo[key] = result
        return result

    def holds_local(self, phi: Formula, agent: str, local: LocalState) -> bool:
        """Evaluate a test that is local to ``agent`` at its local state."""
        if isinstance(phi, Const):
            return phi.value
        if isinstance(phi, Prop):
            return self.interp.local_holds(phi.name, agent, local)
        if isinstance(phi, Not):
            return not self.holds_local(phi.sub, agent, local)
        if isinstance(phi, And):
            return self.holds_local(phi.left, agent, local) and self.holds_local(
                phi.right, agent, local
            )
        if isinstance(phi, Or):
            return self.holds_local(phi.left, agent, local) or self.holds_local(
                phi.right, agent, local
            )
        if isinstance(phi, Implies):
            return (not self.holds_local(phi.left, agent, local)) or self.holds_local(
                phi.right, agent, local
            )
        if isinstance(phi, (Know, Believe)) and phi.agent == agent:
            return self.modal(phi, local)
        raise IllegalInput(f"test {phi!r} is not local to {agent}")


def eval_knowledge(system: InterpretedSystem, point: Point, phi: Formula) -> bool:
    """Truth of a knowledge-language formula at a point of an interpreted system."""
    if not in_knowledge_language(phi):
        raise IllegalInput("eval_knowledge expects a formula without belief or counterfactuals")
    return system.evaluator.holds(phi, point.run, point.time)


def eval(system: ExtendedSystem, point: Point, phi: Formula) -> bool:  # noqa: A001
    """Truth of a formula at a point of an extended system."""
    return system.evaluator.holds(phi, point.run, point.time)


def extension(system: Any, phi: Formula, runs: Sequence[Run] | None = None) -> list[Point]:
    """Points satisfying ``phi``; points where evaluation hits the horizon are left out.

    ``runs`` defaults to the explicit universe (or run set) of the system.
    """
    if runs is None:
        universe = getattr(system, "universe", None)
        if universe is not None and hasattr(universe, "runs"):
            runs = universe.runs
        elif hasattr(system, "runs") and not hasattr(system, "universe"):
            runs = system.runs
        else:
            raise IllegalInput("extension over a lazy universe needs an explicit run list")
    ev = system.evaluator
    out = []
    for run in runs:
        for m in range(len(run)):
            try:
                if ev.holds(phi, run, m):
                    out.append(Point(run, m))
            except HorizonError:
                continue
    return out


# ---------------------------------------------------------------------------
# Random formulas


def random_formula(
    rng: random.Random,
    props: Sequence[str],
    agents: Sequence[str],
    depth: int,
    *,
    temporal: bool = True,
    next_op: bool = False,
) -> Formula:
    """A random knowledge-language formula of depth at most ``depth``."""
    if depth <= 0 or rng.random() < 0.2:
        choice = rng.random()
        if choice < 0.08:
            return Const(rng.random() < 0.5)
        return Prop(rng.choice(list(props)))
    ops = ["not", "and", "or", "implies", "know", "know"]
    if temporal:
        ops += ["eventually", "always"]
    if next_op:
        ops.append("next")
    op = rng.choice(ops)
    sub = lambda: random_formula(rng, props, agents, depth - 1, temporal=temporal, next_op=next_op)
    if op == "not":
        return Not(sub())
    if op == "and":
        return And(sub(), sub())
    if op == "or":
        return Or(sub(), sub())
    if op == "implies":
        return Implies(sub(), sub())
    if op == "know":
        return Know(rng.choice(list(agents)), sub())
    if op == "eventually":
        return Eventually(sub())
    if op == "always":
        return Always(sub())
    return Next(sub())
