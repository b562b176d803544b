from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cbbcheck.model import (
    SKIP,
    Context,
    EnvState,
    Explosion,
    ExplicitUniverse,
    GlobalState,
    JointAction,
    LazyUniverse,
    LocalState,
    ModelError,
    UnknownAction,
    consistent,
    deviations,
    format_run,
    generate_runs,
    generate_universe,
    maximal_protocol,
    random_context,
    random_protocol,
    skip_protocol,
    step,
)

import oracles

seeds = st.integers(min_value=0, max_value=400)


def small(seed):
    return random_context(seed, max_runs=600)


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(0, 50))
def test_generate_runs_matches_brute_force(seed, pseed):
    ctx = small(seed)
    proto = random_protocol(ctx, pseed)
    got = generate_runs(proto, ctx)
    assert len(got) == len(set(got))
    assert set(got) == oracles.protocol_runs(ctx, proto)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_universe_is_runs_of_maximal_protocol(seed):
    ctx = small(seed)
    assert set(generate_universe(ctx)) == oracles.universe(ctx)
    assert set(generate_universe(ctx)) == set(generate_runs(maximal_protocol(ctx), ctx))


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(0, 50))
def test_consistent_and_deviations_agree_with_membership(seed, pseed):
    ctx = small(seed)
    proto = random_protocol(ctx, pseed)
    runs = set(generate_runs(proto, ctx))
    for run in generate_universe(ctx):
        assert consistent(run, proto, ctx) == (run in runs)
        assert deviations(run, proto, ctx) == oracles.deviation_count(run, proto, ctx)
        assert (deviations(run, proto, ctx) == 0) == (run in runs)


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(0, 50))
def test_lazy_points_match_explicit(seed, pseed):
    ctx = small(seed)
    proto = random_protocol(ctx, pseed)
    explicit = ExplicitUniverse(ctx)
    lazy = LazyUniverse(ctx, proto)
    for agent in ctx.agents:
        locals_ = explicit.local_states(agent, ctx.horizon)
        assert set(lazy.local_states(agent, ctx.horizon)) == set(locals_)
        for loc in locals_:
            want = {(r, m) for r, m in explicit.points(agent, loc)}
            assert set(lazy.points(agent, loc, True)) == want
            prefixes = {(r.states, m) for r, m in lazy.points(agent, loc, False)}
            assert prefixes == {(r.states[: m + 1], m) for r, m in want}


def test_random_context_is_deterministic():
    a, b = random_context(7), random_context(7)
    assert a.agents == b.agents and a.horizon == b.horizon
    assert [format_run(r) for r in generate_universe(a)] == [format_run(r) for r in generate_universe(b)]


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(0, 3))
def test_random_context_respects_run_bound(seed, slack):
    ctx = random_context(seed, max_runs=500, horizon_slack=slack)
    assert len(generate_universe(ctx)) <= 500


def test_with_horizon_keeps_rules():
    ctx = small(3)
    longer = ctx.with_horizon(ctx.horizon + 1)
    assert longer.horizon == ctx.horizon + 1
    runs = generate_universe(longer)
    assert all(len(r) == ctx.horizon + 2 for r in runs)
    # prefixes of longer runs are prefixes of shorter ones when everything is admissible
    if ctx.admissible is None:
        short = {r.states for r in generate_universe(ctx)}
        assert {r.states[: ctx.horizon + 1] for r in runs} == short


def _counter_context(horizon=3):
    """One agent that may tick; the environment records the tick count."""
    g0 = GlobalState(EnvState(0, None, (), (0,)), (LocalState("a", 0),))

    def transition(ea, acts, g):
        n = g.env.data[0] + (acts[0] == "tick")
        loc = g.locals[0]
        return GlobalState(
            EnvState(g.time + 1, JointAction(ea, (("a", acts[0]),)), (), (n,)),
            (LocalState("a", loc.clock + 1, (), loc.history + (acts[0],)),),
        )

    return Context(
        name="counter",
        agents=("a",),
        action_sets={"a": frozenset({SKIP, "tick"})},
        initial_states=(g0,),
        env_protocol=lambda env: (None,),
        transition=transition,
        horizon=horizon,
    )


def test_hand_built_context_counts():
    ctx = _counter_context(3)
    assert len(generate_universe(ctx)) == 2**3
    assert len(generate_runs(skip_protocol(), ctx)) == 1
    ticks = [r[-1].env.data[0] for r in generate_universe(ctx)]
    assert sorted(ticks) == [0, 1, 1, 1, 2, 2, 2, 3]


def test_step_rejects_undeclared_actions():
    ctx = _counter_context()
    g0 = ctx.initial_states[0]
    assert step(g0, JointAction(None, (("a", "tick"),)), ctx).env.data == (1,)
    with pytest.raises(UnknownAction):
        step(g0, JointAction(None, (("a", "jump"),)), ctx)
    with pytest.raises(UnknownAction):
        step(g0, JointAction("storm", (("a", "tick"),)), ctx)


def test_enumeration_cap_raises_explosion():
    ctx = _counter_context(10)
    with pytest.raises(Explosion):
        generate_universe(ctx, 100)


def test_context_validation():
    g0 = _counter_context().initial_states[0]
    base = dict(
        name="bad",
        agents=("a",),
        action_sets={"a": frozenset({SKIP})},
        initial_states=(g0,),
        env_protocol=lambda env: (None,),
        transition=lambda ea, acts, g: g,
        horizon=1,
    )
    with pytest.raises(ModelError):
        Context(**{**base, "action_sets": {"a": frozenset({"tick"})}})
    with pytest.raises(ModelError):
        Context(**{**base, "initial_states": ()})
    with pytest.raises(ModelError):
        Context(**{**base, "horizon": -1})
    with pytest.raises(ModelError):
        Context(**{**base, "agents": ("a", "a")})
