"""States, runs, contexts and protocols.

Runs are bounded: a run is the sequence of global states at times
``0..T`` where ``T`` is the context horizon.  Two universe backends are
provided.  :class:`ExplicitUniverse` enumerates every run up front and is
meant for small contexts.  :class:`LazyUniverse` answers the same questions
by targeted search over prefixes and is what makes the bit-transmission
contexts tractable.
"""
from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Iterable, Iterator, Mapping, Sequence

__all__ = [
    "SKIP",
    "ModelError",
    "Explosion",
    "UnknownAction",
    "Message",
    "Event",
    "LocalState",
    "JointAction",
    "EnvState",
    "GlobalState",
    "Run",
    "Point",
    "Protocol",
    "FunctionProtocol",
    "TableProtocol",
    "Context",
    "maximal_protocol",
    "skip_protocol",
    "random_protocol",
    "step",
    "consistent",
    "deviations",
    "generate_runs",
    "generate_universe",
    "indistinguishable",
    "random_context",
    "format_local",
    "format_state",
    "format_run",
    "ExplicitUniverse",
    "LazyUniverse",
    "DEFAULT_CAP",
]

SKIP = "skip"
DEFAULT_CAP = 250_000


class ModelError(Exception):
    """Base class for model errors."""


class Explosion(ModelError):
    """An enumeration exceeded its configured cap."""

    def __init__(self, what: str, count: int, cap: int):
        super().__init__(f"{what}: more than {cap} items (stopped at {count})")
        self.what = what
        self.count = count
        self.cap = cap


class UnknownAction(ModelError):
    """An action outside the declared action set was used."""


@dataclass(frozen=True)
class Message:
    sender: str
    recipient: str
    payload: Any
    sent_at: int


@dataclass(frozen=True)
class Event:
    """A timestamped entry of a message history."""

    time: int
    kind: str  # "sent" or "recv"
    payload: Any
    peer: str


@dataclass(frozen=True)
class LocalState:
    """An agent's local state: clock, static variables and message history."""

    agent: str
    clock: int
    vars: tuple[tuple[str, Any], ...] = ()
    history: tuple[Any, ...] = ()
    _hash: int = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "_hash", hash((self.agent, self.clock, self.vars, self.history))
        )

    def __hash__(self) -> int:
        return self._hash

    def var(self, name: str, default: Any = None) -> Any:
        for key, value in self.vars:
            if key == name:
                return value
        return default


@dataclass(frozen=True)
class JointAction:
    """The environment's (recorded) action plus one action per agent."""

    env: Any
    agents: tuple[tuple[str, str], ...]

    def action(self, agent: str) -> str:
        for name, act in self.agents:
            if name == agent:
                return act
        raise KeyError(agent)


@dataclass(frozen=True)
class EnvState:
    time: int
    last: JointAction | None = None
    in_transit: tuple[Message, ...] = ()
    data: tuple[Any, ...] = ()
    _hash: int = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "_hash", hash((self.time, self.last, self.in_transit, self.data))
        )

    def __hash__(self) -> int:
        return self._hash


@dataclass(frozen=True)
class GlobalState:
    env: EnvState
    locals: tuple[LocalState, ...]
    _hash: int = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_hash", hash((self.env, self.locals)))

    def __hash__(self) -> int:
        return self._hash

    @property
    def time(self) -> int:
        return self.env.time

    def local(self, agent: str) -> LocalState:
        for loc in self.locals:
            if loc.agent == agent:
                return loc
        raise KeyError(agent)


@dataclass(frozen=True)
class Run:
    """A sequence of global states; full runs have length horizon + 1."""

    states: tuple[GlobalState, ...]
    _hash: int = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_hash", hash(self.states))

    def __hash__(self) -> int:
        return self._hash

    def __len__(self) -> int:
        return len(self.states)

    def __getitem__(self, m: int) -> GlobalState:
        return self.states[m]

    def __iter__(self) -> Iterator[GlobalState]:
        return iter(self.states)

    @property
    def last_time(self) -> int:
        return len(self.states) - 1

    def action(self, agent: str, m: int) -> str:
        """The action ``agent`` performs in round ``m+1``."""
        return self.states[m + 1].env.last.action(agent)


@dataclass(frozen=True)
class Point:
    run: Run
    time: int

    @property
    def state(self) -> GlobalState:
        return self.run[self.time]


class Protocol:
    """Maps an agent's local state to a nonempty set of actions.

    Subclasses provide a ``name`` attribute used in reports.
    """

    def actions(self, agent: str, local: LocalState) -> frozenset[str]:
        raise NotImplementedError

    def __str__(self) -> str:
        return getattr(self, "name", type(self).__name__)


@dataclass(frozen=True, eq=False)
class FunctionProtocol(Protocol):
    """A protocol given by one rule per agent; missing agents always skip."""

    name: str
    rules: Mapping[str, Callable[[LocalState], Iterable[str]]]

    def actions(self, agent: str, local: LocalState) -> frozenset[str]:
        rule = self.rules.get(agent)
        if rule is None:
            return frozenset({SKIP})
        acts = frozenset(rule(local))
        if not acts:
            raise ModelError(f"{self.name}: empty action set for {agent} at {local}")
        return acts


@dataclass(frozen=True, eq=False)
class TableProtocol(Protocol):
    """A protocol given by an explicit table with a fallback protocol."""

    name: str
    table: Mapping[tuple[str, LocalState], frozenset[str]]
    fallback: Protocol | None = None

    def actions(self, agent: str, local: LocalState) -> frozenset[str]:
        acts = self.table.get((agent, local))
        if acts is not None:
            return acts
        if self.fallback is None:
            return frozenset({SKIP})
        return self.fallback.actions(agent, local)


@dataclass(frozen=True, eq=False)
class Context:
    """A bounded recording context.

    ``transition(env_action, actions, g)`` receives the agents' actions in
    ``agents`` order and must record the joint action in the new env state.
    ``admissible=None`` means every run is admissible.  ``free_completion``
    promises that every prefix extends to an admissible run no matter what
    the agents do, which lets searches skip completion checks.
    ``compatible(loc, target)`` may prune searches: it returns False when
    an agent in state ``loc`` can no longer reach ``target`` later on.
    ``projection(g, agent)`` may return a key such that the local states
    ``agent`` can reach from ``g`` in the universe depend on the key alone.
    ``rebuild(horizon)``, when given, builds the same context at another
    horizon; contexts whose rules mention the horizon need it.
    """

    name: str
    agents: tuple[str, ...]
    action_sets: Mapping[str, frozenset[str]]
    initial_states: tuple[GlobalState, ...]
    env_protocol: Callable[[EnvState], Sequence[Any]]
    transition: Callable[[Any, tuple[str, ...], GlobalState], GlobalState]
    horizon: int
    admissible: Callable[[Sequence[GlobalState]], bool] | None = None
    guard: int = 0
    free_completion: bool = False
    compatible: Callable[[LocalState, LocalState], bool] | None = None
    params: Mapping[str, Any] = field(default_factory=dict)
    cap: int = DEFAULT_CAP
    compatible_global: Callable[[GlobalState, str, LocalState], bool] | None = None
    projection: Callable[[GlobalState, str], Any] | None = None
    rebuild: Callable[[int], "Context"] | None = None
    _succ_cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.initial_states:
            raise ModelError("a context needs at least one initial state")
        if len(set(self.agents)) != len(self.agents) or not all(self.agents):
            raise ModelError("agent names must be nonempty and unique")
        for agent in self.agents:
            acts = self.action_sets.get(agent)
            if not acts or SKIP not in acts:
                raise ModelError(f"action set of {agent} must contain {SKIP!r}")
        if self.horizon < 0:
            raise ModelError("horizon must be nonnegative")

    @property
    def window(self) -> int:
        """Largest clock at which implementation checks compare protocols."""
        return self.horizon - self.guard

    def with_horizon(self, horizon: int) -> "Context":
        if self.rebuild is not None:
            return self.rebuild(horizon)
        params = dict(self.params)
        if "horizon" in params:
            params["horizon"] = horizon
        return replace(self, horizon=horizon, params=params)

    def is_admissible(self, states: Sequence[GlobalState]) -> bool:
        return self.admissible is None or self.admissible(states)


def maximal_protocol(ctx: Context) -> Protocol:
    """The protocol allowing every declared action everywhere."""
    return FunctionProtocol(
        "ANY", {a: (lambda loc, acts=ctx.action_sets[a]: acts) for a in ctx.agents}
    )


def skip_protocol(name: str = "SKIP") -> Protocol:
    return FunctionProtocol(name, {})


@dataclass(frozen=True, eq=False)
class _RandomProtocol(Protocol):
    name: str
    seed: int
    action_sets: Mapping[str, frozenset[str]]

    _memo: dict = field(default_factory=dict, init=False, repr=False)

    def actions(self, agent: str, local: LocalState) -> frozenset[str]:
        key = (agent, local)
        hit = self._memo.get(key)
        if hit is None:
            rng = random.Random(f"{self.seed}|{agent}|{local!r}")
            acts = sorted(self.action_sets[agent])
            k = rng.randint(1, len(acts)) if rng.random() < 0.35 else 1
            hit = self._memo[key] = frozenset(rng.sample(acts, k))
        return hit


def random_protocol(ctx: Context, seed: int) -> Protocol:
    """A seeded, possibly nondeterministic protocol over ``ctx``'s action sets."""
    return _RandomProtocol(f"RAND{seed}", seed, dict(ctx.action_sets))


def _check_actions(ctx: Context, agent: str, acts: Iterable[str]) -> None:
    allowed = ctx.action_sets[agent]
    for act in acts:
        if act not in allowed:
            raise UnknownAction(f"{act!r} is not an action of {agent}")


def step(g: GlobalState, ja: JointAction, ctx: Context) -> GlobalState:
    """Apply one round: ``ja.env`` is the environment's choice."""
    acts = []
    for agent in ctx.agents:
        act = dict(ja.agents).get(agent, SKIP)
        _check_actions(ctx, agent, [act])
        acts.append(act)
    if ja.env not in ctx.env_protocol(g.env):
        raise UnknownAction(f"environment action {ja.env!r} not allowed here")
    return ctx.transition(ja.env, tuple(acts), g)


def _protocol_choices(ctx: Context, protocol: Protocol, g: GlobalState) -> list[list[str]]:
    out = []
    for agent in ctx.agents:
        acts = protocol.actions(agent, g.local(agent))
        _check_actions(ctx, agent, acts)
        out.append(sorted(acts))
    return out


def _successors(
    ctx: Context, g: GlobalState, choices: Sequence[Sequence[str]]
) -> list[GlobalState]:
    """Distinct successor states, in lexicographic choice order."""
    key = (g, tuple(tuple(c) for c in choices))
    cache = ctx._succ_cache
    hit = cache.get(key)
    if hit is not None:
        return hit
    out: list[GlobalState] = []
    seen: set[GlobalState] = set()
    env_actions = ctx.env_protocol(g.env)
    for acts in itertools.product(*choices):
        for env_action in env_actions:
            nxt = ctx.transition(env_action, acts, g)
            if nxt not in seen:
                seen.add(nxt)
                out.append(nxt)
    if len(cache) < 500_000:
        cache[key] = out
    return out


def consistent(run: Run | Sequence[GlobalState], protocol: Protocol, ctx: Context) -> bool:
    """Whether ``run`` is a run of ``protocol`` in ``ctx``."""
    states = tuple(run)
    if len(states) != ctx.horizon + 1:
        return False
    if states[0] not in ctx.initial_states:
        return False
    if not ctx.is_admissible(states):
        return False
    for m in range(ctx.horizon):
        g, nxt = states[m], states[m + 1]
        last = nxt.env.last
        if last is None:
            return False
        acts = []
        for agent in ctx.agents:
            act = last.action(agent)
            if act not in protocol.actions(agent, g.local(agent)):
                return False
            acts.append(act)
        acts_t = tuple(acts)
        if not any(
            ctx.transition(ea, acts_t, g) == nxt for ea in ctx.env_protocol(g.env)
        ):
            return False
    return True


def deviations(run: Run | Sequence[GlobalState], protocol: Protocol, ctx: Context) -> int:
    """Number of (agent, round) pairs where the action is not prescribed."""
    states = tuple(run)
    count = 0
    for m in range(len(states) - 1):
        g, last = states[m], states[m + 1].env.last
        for agent in ctx.agents:
            if last.action(agent) not in protocol.actions(agent, g.local(agent)):
                count += 1
    return count


def _enumerate(
    ctx: Context, choose: Callable[[GlobalState], list[list[str]]], cap: int, what: str
) -> list[Run]:
    T = ctx.horizon
    out: list[Run] = []
    path: list[GlobalState] = []

    def walk(g: GlobalState) -> None:
        path.append(g)
        if len(path) == T + 1:
            if ctx.is_admissible(path):
                out.append(Run(tuple(path)))
                if len(out) > cap:
                    raise Explosion(what, len(out), cap)
        else:
            for nxt in _successors(ctx, g, choose(g)):
                walk(nxt)
        path.pop()

    for g0 in ctx.initial_states:
        walk(g0)
    return out


def generate_runs(protocol: Protocol, ctx: Context, cap: int | None = None) -> list[Run]:
    """All runs consistent with ``protocol``, in lexicographic choice order."""
    return _enumerate(
        ctx,
        lambda g: _protocol_choices(ctx, protocol, g),
        ctx.cap if cap is None else cap,
        f"runs of {protocol.name}",
    )


def generate_universe(ctx: Context, cap: int | None = None) -> list[Run]:
    """Every admissible run in which agents pick any declared actions."""
    return generate_runs(maximal_protocol(ctx), ctx, cap)


def indistinguishable(p: Point, q: Point, agent: str) -> bool:
    return p.state.local(agent) == q.state.local(agent)


# ---------------------------------------------------------------------------
# Text traces


def _fmt_value(v: Any) -> str:
    if isinstance(v, tuple):
        return "[" + ",".join(_fmt_value(x) for x in v) + "]"
    if isinstance(v, Event):
        return f"{v.kind}@{v.time}:{v.payload}:{v.peer}"
    if isinstance(v, Message):
        return f"{v.sender}>{v.recipient}:{v.payload}@{v.sent_at}"
    return str(v)


def format_local(loc: LocalState) -> str:
    fields = [f"clock={loc.clock}"]
    fields += [f"{k}={_fmt_value(v)}" for k, v in loc.vars]
    fields.append(f"hist={_fmt_value(loc.history)}")
    return f"{loc.agent}=({' '.join(fields)})"


def format_state(g: GlobalState) -> str:
    """One-line canonical rendering of a global state."""
    env = g.env
    if env.last is None:
        last = "-"
    else:
        acts = ",".join(f"{a}:{x}" for a, x in env.last.agents)
        last = f"({acts};env={_fmt_value(env.last.env)})"
    parts = [f"t={env.time}", f"last={last}", f"transit={_fmt_value(env.in_transit)}"]
    if env.data:
        parts.append(f"envdata={_fmt_value(env.data)}")
    parts.extend(format_local(loc) for loc in g.locals)
    return " ".join(parts)


def format_run(run: Run | Sequence[GlobalState]) -> str:
    return "\n".join(format_state(g) for g in run)


# ---------------------------------------------------------------------------
# Random contexts


def random_context(
    seed: int,
    *,
    max_agents: int = 3,
    max_actions: int = 3,
    max_horizon: int = 4,
    max_runs: int = 2000,
    horizon_slack: int = 0,
) -> Context:
    """A small, well-formed recording context, deterministic in ``seed``.

    The horizon is lowered until the universe bound (initial states times
    branching to the power of ``horizon + horizon_slack``) fits
    ``max_runs``; if even horizon 1 is too large, action sets are trimmed.
    Local states hold a clock, an optional private bit and either a full or a last-round-only observation history.
    """
    rng = random.Random(seed)
    n_agents = rng.randint(1, max_agents)
    names = tuple("abc"[:n_agents])
    extra = ["x", "y"]
    action_sets = {}
    for a in names:
        k = rng.randint(1, max_actions)
        action_sets[a] = frozenset([SKIP] + extra[: k - 1])
    has_bit = {a: rng.random() < 0.6 for a in names}
    recall = {a: rng.random() < 0.6 for a in names}
    # which other agents' last actions each agent observes
    sees = {a: tuple(b for b in names if b != a and rng.random() < 0.5) for a in names}
    sees_env = {a: rng.random() < 0.4 for a in names}
    env_choices = rng.randint(1, 2)
    env_actions = tuple(range(env_choices))
    admissibility = rng.choice(["all", "all", "someone-acts", "env-ends-0"])

    inits = []
    bit_agents = [a for a in names if has_bit[a]]
    for bits in itertools.product((0, 1), repeat=len(bit_agents)):
        assignment = dict(zip(bit_agents, bits))
        locs = tuple(
            LocalState(a, 0, (("v", assignment[a]),) if a in assignment else ())
            for a in names
        )
        inits.append(GlobalState(EnvState(0, None, (), (0,)), locs))
        if len(inits) >= 4:
            break
    inits_t = tuple(inits)

    def branching() -> int:
        out = env_choices
        for a in names:
            out *= len(action_sets[a])
        return out

    horizon = rng.randint(1, max_horizon)
    while horizon > 1 and len(inits_t) * branching() ** (horizon + horizon_slack) > max_runs:
        horizon -= 1
    # at horizon 1, shrink the largest action set until the bound holds
    while len(inits_t) * branching() ** (horizon + horizon_slack) > max_runs:
        widest = max(names, key=lambda a: (len(action_sets[a]), a))
        if len(action_sets[widest]) == 1:
            break
        action_sets[widest] = frozenset(sorted(action_sets[widest])[:-1]) | {SKIP}

    def env_protocol(env: EnvState) -> Sequence[Any]:
        return env_actions

    def transition(env_action: Any, acts: tuple[str, ...], g: GlobalState) -> GlobalState:
        joint = dict(zip(names, acts))
        env_bit = (g.env.data[0] + env_action) % 2
        locs = []
        for loc in g.locals:
            a = loc.agent
            obs = (joint[a],) + tuple(joint[b] for b in sees[a])
            if sees_env[a]:
                obs += (env_bit,)
            hist = loc.history + (obs,) if recall[a] else (obs,)
            locs.append(LocalState(a, loc.clock + 1, loc.vars, hist))
        last = JointAction(env_action, tuple(zip(names, acts)))
        return GlobalState(EnvState(g.env.time + 1, last, (), (env_bit,)), tuple(locs))

    def admissible(states: Sequence[GlobalState]) -> bool:
        if admissibility == "someone-acts":
            return any(
                act != SKIP
                for g in states[1:]
                for _, act in g.env.last.agents
            ) or len(states) == 1
        if admissibility == "env-ends-0":
            return states[-1].env.data[0] == 0
        return True

    return Context(
        name=f"random{seed}",
        agents=names,
        action_sets=action_sets,
        initial_states=inits_t,
        env_protocol=env_protocol,
        transition=transition,
        horizon=horizon,
        admissible=None if admissibility == "all" else admissible,
        params={"kind": "random", "seed": seed, "horizon": horizon},
    )


# ---------------------------------------------------------------------------
# Universe backends


class ExplicitUniverse:
    """All runs of a context, enumerated once, with local-state indexes."""

    def __init__(self, ctx: Context, runs: list[Run] | None = None, cap: int | None = None):
        self.ctx = ctx
        self.runs = generate_universe(ctx, cap) if runs is None else runs
        self._index: dict[tuple[str, LocalState], list[tuple[Run, int]]] = {}
        self._position = {run: i for i, run in enumerate(self.runs)}
        for run in self.runs:
            for m, g in enumerate(run):
                for loc in g.locals:
                    self._index.setdefault((loc.agent, loc), []).append((run, m))

    @property
    def horizon(self) -> int:
        return self.ctx.horizon

    def points_with(self, agent: str, local: LocalState) -> list[tuple[Run, int]]:
        return self._index.get((agent, local), [])

    def points(
        self,
        agent: str,
        local: LocalState,
        need_paths: bool = True,
        root_filter: Callable[[GlobalState], bool] | None = None,
    ) -> list[tuple[Run, int]]:
        pts = self.points_with(agent, local)
        if root_filter is None:
            return pts
        return [(r, m) for r, m in pts if root_filter(r[0])]

    def has_local(self, agent: str, local: LocalState) -> bool:
        return (agent, local) in self._index

    def position(self, run: Run) -> int:
        return self._position[run]

    def local_states(self, agent: str, max_clock: int) -> list[LocalState]:
        seen: dict[LocalState, None] = {}
        for (a, loc), pts in self._index.items():
            if a == agent and pts[0][1] <= max_clock:
                seen.setdefault(loc, None)
        return list(seen)

    def close(
        self, agent: str, action: str, protocol: Protocol, run: Run, m: int
    ) -> list[tuple[Run, int]]:
        ctx = self.ctx
        out = []
        for other in self.runs:
            if other.states[: m + 1] != run.states[: m + 1]:
                continue
            if other.action(agent, m) != action:
                continue
            ok = True
            for k in range(m, ctx.horizon):
                g = other[k]
                for a in ctx.agents:
                    if k == m and a == agent:
                        continue
                    if other.action(a, k) not in protocol.actions(a, g.local(a)):
                        ok = False
                        break
                if not ok:
                    break
            if ok:
                out.append((other, m))
        return out


class LazyUniverse:
    """Answers universe queries by search instead of full enumeration.

    Requires a synchronous context: an agent's clock equals the time.
    Deviations are counted against ``protocol``; searches accept a budget
    on the number of deviations in the prefix.
    """

    def __init__(
        self,
        ctx: Context,
        protocol: Protocol,
        cap: int | None = None,
        runs: list[Run] | None = None,
    ):
        self.ctx = ctx
        self.protocol = protocol
        self.cap = ctx.cap if cap is None else cap
        self._runs = runs
        self._pindex: dict[tuple[str, LocalState], list[tuple[Run, int]]] | None = None
        self._children: dict[GlobalState, list[tuple[GlobalState, int]]] = {}
        self._cost: dict[tuple[GlobalState, ...], float] = {}
        self._maxacts = [sorted(ctx.action_sets[a]) for a in ctx.agents]

    @property
    def horizon(self) -> int:
        return self.ctx.horizon

    @property
    def protocol_runs(self) -> list[Run]:
        if self._runs is None:
            self._runs = generate_runs(self.protocol, self.ctx, self.cap)
        return self._runs

    def protocol_points(self, agent: str, local: LocalState) -> list[tuple[Run, int]]:
        """Points of the protocol's own runs where ``agent`` has ``local``."""
        if self._pindex is None:
            index: dict[tuple[str, LocalState], list[tuple[Run, int]]] = {}
            for run in self.protocol_runs:
                for m, g in enumerate(run):
                    for loc in g.locals:
                        index.setdefault((loc.agent, loc), []).append((run, m))
            self._pindex = index
        return self._pindex.get((agent, local), [])

    def points(
        self,
        agent: str,
        local: LocalState,
        need_paths: bool = True,
        root_filter: Callable[[GlobalState], bool] | None = None,
    ) -> Iterator[tuple[Run, int]]:
        """All universe points where ``agent`` has ``local``.

        Without ``need_paths`` the runs yielded are prefixes ending at the
        point, which is enough for formulas that depend on the state only.
        """
        n = local.clock
        for prefix, _ in self.prefixes(n, math.inf, (agent, local), root_filter):
            if self.completion_cost(prefix) == math.inf:
                continue
            if need_paths:
                for run in self.continuations(prefix, None, exact=None):
                    yield run, n
            else:
                yield Run(prefix), n

    def has_local(self, agent: str, local: LocalState) -> bool:
        if self.protocol_points(agent, local):
            return True
        return next(iter(self.points(agent, local, need_paths=False)), None) is not None

    def step_deviation(self, g: GlobalState, nxt: GlobalState) -> int:
        last = nxt.env.last
        return sum(
            1
            for a in self.ctx.agents
            if last.action(a) not in self.protocol.actions(a, g.local(a))
        )

    def children(self, g: GlobalState) -> list[tuple[GlobalState, int]]:
        """All universe successors of ``g`` with their deviation counts."""
        kids = self._children.get(g)
        if kids is None:
            kids = [
                (nxt, self.step_deviation(g, nxt))
                for nxt in _successors(self.ctx, g, self._maxacts)
            ]
            if len(self._children) < 400_000:
                self._children[g] = kids
        return kids

    def completion_cost(self, prefix: Sequence[GlobalState]) -> float:
        """Fewest deviations over admissible completions of ``prefix`` (inf if none)."""
        ctx = self.ctx
        if ctx.admissible is None:
            return 0
        if len(prefix) == ctx.horizon + 1:
            return 0 if ctx.is_admissible(prefix) else math.inf
        if ctx.free_completion:
            return 0
        key = tuple(prefix)
        hit = self._cost.get(key)
        if hit is not None:
            return hit
        cost: float = math.inf
        for budget in range((ctx.horizon - len(key) + 1) * len(ctx.agents) + 1):
            if self._extends(list(key), budget):
                cost = budget
                break
        self._cost[key] = cost
        return cost

    def _extends(self, path: list[GlobalState], budget: int) -> bool:
        g = path[-1]
        if g.time == self.ctx.horizon:
            return self.ctx.is_admissible(path)
        for nxt, dev in sorted(self.children(g), key=lambda kd: kd[1]):
            if dev <= budget:
                path.append(nxt)
                ok = self._extends(path, budget - dev)
                path.pop()
                if ok:
                    return True
        return False

    def prefixes(
        self,
        depth: int,
        budget: float,
        target: tuple[str, LocalState] | None = None,
        root_filter: Callable[[GlobalState], bool] | None = None,
        node_filter: Callable[[GlobalState], bool] | None = None,
) -> Iterator[tuple[tuple[GlobalState, ...], int]]:
        """Universe prefixes of length ``depth+1`` with at most ``budget`` deviations.

        With ``target=(agent, local)`` only prefixes ending in that local
        state are produced and the search is pruned by the context's
        compatibility hooks.
        """
        ctx = self.ctx
        compat = ctx.compatible
        compat_g = ctx.compatible_global
        path: list[GlobalState] = []
        count = 0

        def ok(g: GlobalState) -> bool:
            if node_filter is not None and not node_filter(g):
                return False
            if target is None:
                return True
            agent, goal = target
            loc = g.local(agent)
            if g.time == depth:
                return loc == goal
            if compat is not None and not compat(loc, goal):
                return False
            if compat_g is not None and not compat_g(g, agent, goal):
                return False
            return True

        def walk(g: GlobalState, dev: int) -> Iterator[tuple[tuple[GlobalState, ...], int]]:
            nonlocal count
            path.append(g)
            if g.time == depth:
                count += 1
                if count > self.cap:
                    raise Explosion("prefix search", count, self.cap)
                yield tuple(path), dev
            else:
                for nxt, d in self.children(g):
                    if dev + d <= budget and ok(nxt):
                        yield from walk(nxt, dev + d)
            path.pop()

        for g0 in ctx.initial_states:
            if root_filter is not None and not root_filter(g0):
                continue
            if ok(g0):
                yield from walk(g0, 0)

    def continuations(
        self,
        prefix: Sequence[GlobalState],
        first: Sequence[Sequence[str]] | None = None,
        exact: int | None = 0,
    ) -> Iterator[Run]:
        """Admissible full runs extending ``prefix``.

        ``first`` restricts the agents' choices in the next round; those
        choices are not counted as deviations.  ``exact`` is the number of
        deviations required afterwards (``None`` means any number).
        """
        ctx = self.ctx
        T = ctx.horizon
        path = list(prefix)
        count = 0

        def walk(dev: int) -> Iterator[Run]:
            nonlocal count
            g = path[-1]
            if g.time == T:
                if (exact is None or dev == exact) and ctx.is_admissible(path):
                    count += 1
                    if count > self.cap:
                        raise Explosion("continuations", count, self.cap)
                    yield Run(tuple(path))
                return
            if first is not None and len(path) == len(prefix):
                kids = [(nxt, 0) for nxt in _successors(ctx, g, first)]
            elif exact == 0:
                kids = [
                    (nxt, 0)
                    for nxt in _successors(ctx, g, _protocol_choices(ctx, self.protocol, g))
                ]
            else:
                kids = self.children(g)
            for nxt, d in kids:
                if exact is not None and dev + d > exact:
                    continue
                path.append(nxt)
                yield from walk(dev + d)
                path.pop()

        if len(path) - 1 > T:
            return
        yield from walk(0)

    def local_states(self, agent: str, max_clock: int) -> list[LocalState]:
        """Local states of ``agent`` occurring in the universe at clocks up to ``max_clock``.

        Only prefixes with an admissible completion count.  When the context
        has a projection, states with equal keys are explored once.
        """
        ctx = self.ctx
        depth = min(max_clock, ctx.horizon)
        if ctx.projection is None or not ctx.free_completion:
            return self._local_states_dfs(agent, depth)
        seen: dict[LocalState, None] = {}
        level = {ctx.projection(g, agent): g for g in ctx.initial_states}
        count = 0
        for t in range(depth + 1):
            for g in level.values():
                seen.setdefault(g.local(agent), None)
            if t == depth:
                break
            nxt_level: dict[Any, GlobalState] = {}
            for g in level.values():
                for nxt, _ in self.children(g):
                    key = ctx.projection(nxt, agent)
                    if key not in nxt_level:
                        nxt_level[key] = nxt
                        count += 1
                        if count > self.cap:
                            raise Explosion("universe local states", count, self.cap)
            level = nxt_level
        if depth == ctx.horizon and ctx.admissible is not None:
            # full runs must be admissible themselves
            return self._local_states_dfs(agent, depth)
        return list(seen)

    def _local_states_dfs(self, agent: str, depth: int) -> list[LocalState]:
        seen: dict[LocalState, None] = {}
        count = 0
        path: list[GlobalState] = []

        def walk(g: GlobalState) -> None:
            nonlocal count
            path.append(g)
            count += 1
            if count > self.cap:
                raise Explosion("universe local states", count, self.cap)
            if self.completion_cost(path) < math.inf:
                seen.setdefault(g.local(agent), None)
                if g.time < depth:
                    for nxt, _ in self.children(g):
                        walk(nxt)
            path.pop()

        for g0 in self.ctx.initial_states:
            walk(g0)
        return list(seen)
