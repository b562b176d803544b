from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cbbcheck.logic import HorizonError, random_interpretation
from cbbcheck.model import (
    ExplicitUniverse,
    LazyUniverse,
    Point,
    UnknownAction,
    generate_runs,
    generate_universe,
    random_context,
    random_protocol,
)
from cbbcheck.ranking import (
    INF,
    ExtendedContext,
    TableRanking,
    characteristic_rank,
    close,
    constant_rank,
    deviation_count_rank,
    first_close_order,
    is_deviation_compatible,
    min_rank,
    ranking_table,
)

import oracles


def setup(seed, pseed):
    ctx = random_context(seed, max_runs=300)
    return ctx, random_protocol(ctx, pseed)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 300), st.integers(0, 30), st.sampled_from([1, None]))
def test_min_rank_matches_oracle(seed, pseed, saturate):
    ctx, proto = setup(seed, pseed)
    gen = characteristic_rank if saturate == 1 else deviation_count_rank
    kappa = gen(proto, ctx)
    oracle = oracles.Oracle(ctx, proto, None, oracles.universe(ctx), saturate=saturate)
    explicit = ExplicitUniverse(ctx)
    lazy = LazyUniverse(ctx, proto)
    for run in explicit.runs:
        assert kappa.rank(run) == oracle.rank(run)
        for m in range(len(run)):
            for agent in ctx.agents:
                want = min(oracle.rank(r) for r, _ in oracle.same_local(oracle.runs, agent, run[m].local(agent)))
                assert min_rank(agent, Point(run, m), kappa, explicit) == want
                assert min_rank(agent, Point(run, m), kappa, lazy) == want


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 300), st.integers(0, 30))
def test_belief_points_are_min_rank_class(seed, pseed):
    ctx, proto = setup(seed, pseed)
    oracle = oracles.Oracle(ctx, proto, None, oracles.universe(ctx), saturate=None)
    kappa = deviation_count_rank(proto, ctx)
    lazy = LazyUniverse(ctx, proto)
    for agent in ctx.agents:
        for loc in lazy.local_states(agent, ctx.horizon):
            pts = oracle.same_local(oracle.runs, agent, loc)
            best = min(oracle.rank(r) for r, _ in pts)
            want = {(r, m) for r, m in pts if oracle.rank(r) == best}
            assert set(kappa.belief_points(lazy, agent, loc, True)) == want


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 300), st.integers(0, 30))
def test_close_sets_match_oracle(seed, pseed):
    ctx, proto = setup(seed, pseed)
    oracle = oracles.Oracle(ctx, proto, None, oracles.universe(ctx))
    explicit = ExplicitUniverse(ctx)
    lazy = LazyUniverse(ctx, proto)
    for run in explicit.runs[:40]:
        for m in range(ctx.horizon):
            for agent in ctx.agents:
                for act in sorted(ctx.action_sets[agent]):
                    want = set(oracle.close(agent, act, run, m))
                    p = Point(run, m)
                    assert set(close(agent, act, proto, ctx, p, explicit)) == want
                    assert set(close(agent, act, proto, ctx, p, lazy)) == want


def test_close_errors():
    ctx, proto = setup(4, 0)
    run = generate_universe(ctx)[0]
    agent = ctx.agents[0]
    with pytest.raises(HorizonError):
        close(agent, "skip", proto, ctx, Point(run, ctx.horizon))
    with pytest.raises(UnknownAction):
        close(agent, "jump", proto, ctx, Point(run, 0))


def test_first_close_order_keeps_one_point():
    for seed in range(30):
        ctx, proto = setup(seed, 1)
        universe = ExplicitUniverse(ctx)
        order = first_close_order(proto, ctx, universe)
        for run in universe.runs[:10]:
            for agent in ctx.agents:
                for act in ctx.action_sets[agent]:
                    full = close(agent, act, proto, ctx, Point(run, 0), universe)
                    got = order.closest(agent, act, run, 0)
                    assert len(got) == min(1, len(full)) and set(got) <= set(full)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 300), st.integers(0, 30))
def test_deviation_rankings_are_compatible(seed, pseed):
    ctx, proto = setup(seed, pseed)
    runs = set(generate_runs(proto, ctx))
    for gen in (characteristic_rank, deviation_count_rank):
        assert is_deviation_compatible(gen, proto, ctx, exhaustive=True)
        kappa = gen(proto, ctx)
        assert {r for r in generate_universe(ctx) if kappa.rank(r) == 0} == runs


def test_constant_rank_is_not_compatible_when_protocol_restricts():
    for seed in range(50):
        ctx, proto = setup(seed, 2)
        if len(generate_runs(proto, ctx)) < len(generate_universe(ctx)):
            assert not is_deviation_compatible(constant_rank(0), proto, ctx)
            return
    pytest.fail("no restrictive protocol found")


def test_table_ranking_and_table_export():
    ctx, proto = setup(6, 0)
    runs = generate_universe(ctx)
    kappa = TableRanking({runs[0]: 0}, default=3)
    assert ranking_table(kappa, runs[:2]) == [(0, 0), (1, 3)]
    assert TableRanking().rank(runs[0]) == INF


def test_extended_context_backend_choice():
    ctx = random_context(2)
    zeta = ExtendedContext(ctx, random_interpretation(ctx))
    assert zeta.backend == "explicit"
    with pytest.raises(ValueError):
        ExtendedContext(ctx, random_interpretation(ctx), backend="magic")
    assert zeta.with_horizon(ctx.horizon + 1).ctx.horizon == ctx.horizon + 1
