"""Rankings for belief and order assignments for counterfactuals.

A ranking assigns each run of a universe a natural number or infinity;
an agent believes what holds at the points of least rank among those it
cannot tell apart from the current one.  The built-in generators rank a run
by the number of agent deviations from a protocol, either saturated at 1
(``characteristic_rank``) or uncapped (``deviation_count_rank``).

Order assignments are given operationally: :class:`OrderAssignment.closest`
returns the closest points where an agent performs an action next.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Iterator, Sequence

from .logic import ExtendedSystem, HorizonError, InterpretedSystem, Interpretation
from .model import (
    Context,
    Explosion,
    ExplicitUniverse,
    GlobalState,
    LazyUniverse,
    LocalState,
    Point,
    Protocol,
    Run,
    UnknownAction,
    _protocol_choices,
    deviations,
    generate_runs,
)

__all__ = [
    "INF",
    "RankingFunction",
    "TableRanking",
    "DeviationRanking",
    "characteristic_rank",
    "deviation_count_rank",
    "constant_rank",
    "is_deviation_compatible",
    "min_rank",
    "ranking_table",
    "close",
    "closest",
    "OrderAssignment",
    "full_close_order",
    "first_close_order",
    "ExtendedContext",
    "build_extended_system",
]

INF = math.inf

PointList = Iterable[tuple[Run, int]]


class RankingFunction:
    """Base class: ``rank`` maps runs of the universe to ranks."""

    name = "ranking"

    def rank(self, run: Run) -> float:
        raise NotImplementedError

    def min_rank(self, universe: Any, agent: str, local: LocalState) -> float:
        ranks = [self.rank(r) for r, _ in universe.points(agent, local, False)]
        return min(ranks, default=INF)

    def belief_points(
        self,
        universe: Any,
        agent: str,
        local: LocalState,
        need_paths: bool,
        root_filter: Callable[[GlobalState], bool] | None = None,
    ) -> PointList:
        if not isinstance(universe, ExplicitUniverse):
            raise TypeError(f"{self.name} ranking needs an explicit universe")
        pts = universe.points_with(agent, local)
        best = min((self.rank(r) for r, _ in pts), default=INF)
        return [
            (r, m)
            for r, m in pts
            if self.rank(r) == best and (root_filter is None or root_filter(r[0]))
        ]


@dataclass(eq=False)
class TableRanking(RankingFunction):
    """Explicit ranks, with ``default`` for runs not in the table."""

    table: dict[Run, float] = field(default_factory=dict)
    default: float = INF
    name: str = "table"

    def rank(self, run: Run) -> float:
        return self.table.get(run, self.default)


class DeviationRanking(RankingFunction):
    """Rank = number of agent deviations from ``protocol``, capped at ``saturate``."""

    def __init__(self, protocol: Protocol, ctx: Context, saturate: int | None, name: str):
        self.protocol = protocol
        self.ctx = ctx
        self.saturate = saturate
        self.name = name
        self._rank_cache: dict[Run, float] = {}
        self._class_cache: dict[tuple[Any, str, LocalState], tuple[float, Any]] = {}
        self._default_universe: LazyUniverse | None = None

    def rank(self, run: Run) -> float:
        hit = self._rank_cache.get(run)
        if hit is None:
            dev = deviations(run, self.protocol, self.ctx)
            hit = dev if self.saturate is None else min(dev, self.saturate)
            self._rank_cache[run] = hit
        return hit

    def default_universe(self) -> LazyUniverse:
        if self._default_universe is None:
            self._default_universe = LazyUniverse(self.ctx, self.protocol)
        return self._default_universe

    def _min_class(self, universe: LazyUniverse, agent: str, local: LocalState):
        """Least rank at ``local`` and the nodes realizing it.

        Returns ``(rank, "protocol")`` when the protocol's own runs reach the
        state, ``(rank, "all")`` when the rank saturates, and otherwise
        ``(rank, nodes)`` with nodes ``(prefix, completion cost)``.
        """
        key = (universe, agent, local)
        hit = self._class_cache.get(key)
        if hit is not None:
            return hit
        sat = self.saturate
        if universe.protocol_points(agent, local):
            result: tuple[float, Any] = (0, "protocol")
        elif sat is not None and sat <= 1:
            result = (sat, "all") if universe.has_local(agent, local) else (INF, [])
        else:
            result = (INF, [])
            limit = local.clock * len(self.ctx.agents) + self._max_completion()
            for budget in range(1, limit + 1):
                if sat is not None and budget >= sat:
                    if universe.has_local(agent, local):
                        result = (sat, "all")
                    break
                nodes = []
                for prefix, dev in universe.prefixes(local.clock, budget, (agent, local)):
                    cost = universe.completion_cost(prefix)
                    if dev + cost <= budget:
                        nodes.append((prefix, cost))
                if nodes:
                    result = (budget, nodes)
                    break
        self._class_cache[key] = result
        return result

    def _max_completion(self) -> int:
        ctx = self.ctx
        if ctx.free_completion or ctx.admissible is None:
            return 0
        return ctx.horizon * len(ctx.agents)

    def min_rank(self, universe: Any, agent: str, local: LocalState) -> float:
        if isinstance(universe, LazyUniverse):
            self._check_universe(universe)
            return self._min_class(universe, agent, local)[0]
        return super().min_rank(universe, agent, local)

    def _check_universe(self, universe: LazyUniverse) -> None:
        if universe.protocol is not self.protocol:
            raise ValueError("lazy universe counts deviations from a different protocol")

    def belief_points(self, universe, agent, local, need_paths, root_filter=None) -> PointList:
        if not isinstance(universe, LazyUniverse):
            return super().belief_points(universe, agent, local, need_paths, root_filter)
        self._check_universe(universe)
        best, nodes = self._min_class(universe, agent, local)
        if nodes == "protocol":
            pts = universe.protocol_points(agent, local)
            if root_filter is None:
                return pts
            return [(r, m) for r, m in pts if root_filter(r[0])]
        if nodes == "all":
            return universe.points(agent, local, need_paths, root_filter)
        return self._node_points(universe, nodes, local.clock, need_paths, root_filter)

    @staticmethod
    def _node_points(universe, nodes, n, need_paths, root_filter) -> Iterator[tuple[Run, int]]:
        for prefix, cost in nodes:
            if root_filter is not None and not root_filter(prefix[0]):
                continue
            if not need_paths:
                yield Run(prefix), n
                continue
            for run in universe.continuations(prefix, None, exact=cost):
                yield run, n


def characteristic_rank(protocol: Protocol, ctx: Context) -> DeviationRanking:
    """Rank 0 on the protocol's runs and 1 on every other run."""
    return DeviationRanking(protocol, ctx, 1, "characteristic")


def deviation_count_rank(protocol: Protocol, ctx: Context) -> DeviationRanking:
    """Rank = how many times agents deviate from the protocol (environment excluded)."""
    return DeviationRanking(protocol, ctx, None, "deviations")


def constant_rank(value: float = 0) -> Callable[[Protocol, Context], TableRanking]:
    """A generator ignoring the protocol: every run gets ``value``."""

    def gen(protocol: Protocol, ctx: Context) -> TableRanking:
        return TableRanking({}, value, f"constant{value}")

    return gen


def is_deviation_compatible(
    generator: Callable[[Protocol, Context], RankingFunction],
    protocol: Protocol,
    ctx: Context,
    cap: int = 20_000,
    exhaustive: bool = False,
) -> bool:
    """Whether the rank-0 runs are exactly the protocol's runs.

    Deviation rankings of the same protocol have the property by
    construction and are accepted without enumeration unless
    ``exhaustive`` is set.  Other rankings are checked by enumerating the
    universe, which must have at most ``cap`` runs.
    """
    kappa = generator(protocol, ctx)
    structural = isinstance(kappa, DeviationRanking) and kappa.protocol is protocol
    if structural and not exhaustive:
        return kappa.saturate is None or kappa.saturate >= 1
    try:
        universe = ExplicitUniverse(ctx, cap=cap)
    except Explosion:
        if structural:
            return kappa.saturate is None or kappa.saturate >= 1
        raise
    zero = {r for r in universe.runs if kappa.rank(r) == 0}
    return zero == set(generate_runs(protocol, ctx))


def min_rank(
    agent: str, point: Point, kappa: RankingFunction, universe: Any = None
) -> float:
    """Least rank of a run through a point ``agent`` cannot tell from ``point``."""
    if universe is None:
        if not isinstance(kappa, DeviationRanking):
            raise ValueError("min_rank needs a universe for this ranking")
        universe = kappa.default_universe()
    return kappa.min_rank(universe, agent, point.state.local(agent))


def ranking_table(kappa: RankingFunction, runs: Sequence[Run]) -> list[tuple[int, float]]:
    """``(run index, rank)`` pairs in the given run order."""
    return [(i, kappa.rank(r)) for i, r in enumerate(runs)]


# ---------------------------------------------------------------------------
# Close sets and order assignments


def close(
    agent: str,
    action: str,
    protocol: Protocol,
    ctx: Context,
    point: Point,
    universe: Any = None,
) -> list[tuple[Run, int]]:
    """Points where ``agent`` does ``action`` next and everyone then follows ``protocol``.

    If ``agent`` already does ``action`` next at ``point`` the result is
    ``[point]``.  Otherwise it holds every point at the same time whose
    run agrees with ``point``'s run up to that time.
    """
    run, m = point.run, point.time
    if m >= ctx.horizon:
        raise HorizonError(f"close set requested at the horizon {ctx.horizon}")
    if action not in ctx.action_sets[agent]:
        raise UnknownAction(f"{action!r} is not an action of {agent}")
    if run.action(agent, m) == action:
        return [(run, m)]
    if isinstance(universe, ExplicitUniverse):
        return universe.close(agent, action, protocol, run, m)
    if not isinstance(universe, LazyUniverse) or universe.protocol is not protocol:
        universe = LazyUniverse(ctx, protocol)
    prefix = run.states[: m + 1]
    g = prefix[-1]
    first = [
        [action] if a == agent else choices
        for a, choices in zip(ctx.agents, _protocol_choices(ctx, protocol, g))
    ]
    return [(r, m) for r in universe.continuations(prefix, first, exact=0)]


class OrderAssignment:
    """Closest-point answers for do-antecedents relative to a protocol.

    ``pick="all"`` keeps the whole close set; ``pick="first"`` keeps its
    first member in the canonical run order.  Both respect the protocol.
    """

    def __init__(self, protocol: Protocol, ctx: Context, universe: Any, pick: str = "all"):
        if pick not in ("all", "first"):
            raise ValueError(f"unknown pick mode {pick!r}")
        self.protocol = protocol
        self.ctx = ctx
        self.universe = universe
        self.pick = pick
        self._cache: dict[tuple[str, str, tuple[GlobalState, ...]], list[tuple[Run, int]]] = {}

    def closest(self, agent: str, action: str, run: Run, m: int) -> list[tuple[Run, int]]:
        if m < self.ctx.horizon and run.action(agent, m) == action:
            return [(run, m)]
        key = (agent, action, run.states[: m + 1])
        hit = self._cache.get(key)
        if hit is None:
            hit = close(agent, action, self.protocol, self.ctx, Point(run, m), self.universe)
            if self.pick == "first":
                hit = hit[:1]
            self._cache[key] = hit
        return hit

    def tier(self, p: Point, q: Point) -> tuple[float, int]:
        """Sort key of ``q`` in the order at ``p``; smaller is closer.

        ``p`` itself is closest.  Points at the same time on runs agreeing
        with ``p``'s run up to then follow, by how many deviations they make
        from the next round on.  Everything else is infinitely far.
        """
        if q.run == p.run and q.time == p.time:
            return (0, 0)
        m = p.time
        if q.time != m or q.run.states[: m + 1] != p.run.states[: m + 1]:
            return (INF, 0)
        dev = deviations(q.run.states[m:], self.protocol, self.ctx)
        secondary = 0
        if self.pick == "first" and isinstance(self.universe, ExplicitUniverse):
            secondary = self.universe.position(q.run)
        return (1 + dev, secondary)


def full_close_order(protocol: Protocol, ctx: Context, universe: Any) -> OrderAssignment:
    return OrderAssignment(protocol, ctx, universe, "all")


def first_close_order(protocol: Protocol, ctx: Context, universe: Any) -> OrderAssignment:
    return OrderAssignment(protocol, ctx, universe, "first")


def closest(points: Iterable[Point], p: Point, system: ExtendedSystem) -> list[Point]:
    """Minimal members of ``points`` in the system's order at ``p``."""
    order: OrderAssignment = system.order
    scored = [(order.tier(p, q), q) for q in points]
    scored = [(t, q) for t, q in scored if t[0] != INF]
    if not scored:
        return []
    if order.pick == "first":
        best = min(t for t, _ in scored)
        return [q for t, q in scored if t == best]
    best_tier = min(t[0] for t, _ in scored)
    return [q for t, q in scored if t[0] == best_tier]


# ---------------------------------------------------------------------------
# Extended contexts


@dataclass(eq=False)
class ExtendedContext:
    """A context with an interpretation, an order generator and a ranking generator.

    ``backend`` chooses how the universe is represented: ``"explicit"``
    enumerates it, ``"lazy"`` searches it on demand.  The default picks
    explicit enumeration for generated random contexts and lazy search
    otherwise.
    """

    ctx: Context
    interp: Interpretation
    order: Callable[[Protocol, Context, Any], OrderAssignment] = full_close_order
    rank: Callable[[Protocol, Context], RankingFunction] = characteristic_rank
    backend: str | None = None
    _explicit: ExplicitUniverse | None = field(default=None, init=False, repr=False)

    def __post_init__(self) -> None:
        if self.backend is None:
            self.backend = "explicit" if self.ctx.params.get("kind") == "random" else "lazy"
        if self.backend not in ("explicit", "lazy"):
            raise ValueError(f"unknown backend {self.backend!r}")

    @property
    def rank_name(self) -> str:
        return getattr(self.rank, "__name__", "ranking")

    def with_horizon(self, horizon: int) -> "ExtendedContext":
        return ExtendedContext(
            self.ctx.with_horizon(horizon), self.interp, self.order, self.rank, self.backend
        )

    def explicit_universe(self) -> ExplicitUniverse:
        if self._explicit is None:
            self._explicit = ExplicitUniverse(self.ctx)
        return self._explicit

    def interpreted(self, protocol: Protocol, runs: list[Run] | None = None) -> InterpretedSystem:
        """The interpreted system of the protocol's runs."""
        if runs is None:
            runs = generate_runs(protocol, self.ctx)
        return InterpretedSystem(runs, self.interp, self.ctx.horizon)

    def system(self, protocol: Protocol, runs: list[Run] | None = None) -> ExtendedSystem:
        """The extended system built for ``protocol``."""
        if runs is None:
            runs = generate_runs(protocol, self.ctx)
        if self.backend == "explicit":
            universe: Any = self.explicit_universe()
        else:
            universe = LazyUniverse(self.ctx, protocol, runs=runs)
        return ExtendedSystem(
            universe=universe,
            interp=self.interp,
            order=self.order(protocol, self.ctx, universe),
            rank=self.rank(protocol, self.ctx),
            runs=runs,
        )


def build_extended_system(
    protocol: Protocol,
    ctx: Context,
    interp: Interpretation,
    *,
    order=full_close_order,
    rank=characteristic_rank,
    backend: str | None = None,
) -> ExtendedSystem:
    return ExtendedContext(ctx, interp, order, rank, backend).system(protocol)
