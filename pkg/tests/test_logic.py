from __future__ import annotations

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from cbbcheck.logic import (
    And,
    Believe,
    Const,
    Counterfactual,
    DoAtom,
    Eventually,
    HorizonError,
    IllegalInput,
    InterpretedSystem,
    Know,
    Next,
    Not,
    Prop,
    UnknownProposition,
    UnsupportedAntecedent,
    eval_knowledge,
    extension,
    in_knowledge_language,
    is_state_formula,
    modal_depth,
    random_interpretation,
    subformulas,
    to_belief,
)
from cbbcheck.model import Point, generate_runs, generate_universe, random_context, random_protocol
from cbbcheck.ranking import ExtendedContext, characteristic_rank, deviation_count_rank

import oracles

RANKS = {1: characteristic_rank, None: deviation_count_rank}


def vocabulary(ctx):
    props = [f"v{a}" for a in ctx.agents] + [f"x{a}" for a in ctx.agents] + ["e"]
    return ctx.agents, props, ctx.action_sets


def compare(system, oracle, phi, runs):
    for run in runs:
        for m in range(len(run)):
            want = oracle.value(phi, run, m)
            if want == oracles.HORIZON:
                continue
            assert system.evaluator.holds(phi, run, m) == want, (str(phi), m)


@settings(max_examples=80, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.integers(0, 300), st.integers(0, 30), st.sampled_from(["explicit", "lazy"]), st.sampled_from([1, None]), st.data())
def test_extended_evaluation_matches_oracle(seed, pseed, backend, saturate, data):
    ctx = random_context(seed, max_runs=300)
    interp = random_interpretation(ctx)
    proto = random_protocol(ctx, pseed)
    zeta = ExtendedContext(ctx, interp, rank=RANKS[saturate], backend=backend)
    system = zeta.system(proto)
    oracle = oracles.Oracle(ctx, proto, interp, oracles.universe(ctx), saturate=saturate)
    phi = data.draw(oracles.formulas(*vocabulary(ctx)))
    compare(system, oracle, phi, generate_universe(ctx))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 300), st.integers(0, 30), st.data())
def test_interpreted_knowledge_matches_oracle(seed, pseed, data):
    ctx = random_context(seed, max_runs=300)
    interp = random_interpretation(ctx)
    proto = random_protocol(ctx, pseed)
    runs = generate_runs(proto, ctx)
    system = InterpretedSystem(runs, interp, ctx.horizon)
    oracle = oracles.Oracle(ctx, proto, interp, runs)
    phi = data.draw(oracles.formulas(*vocabulary(ctx), belief=False, counterfactual=False))
    for run in runs:
        for m in range(len(run)):
            want = oracle.value(phi, run, m)
            if want != oracles.HORIZON:
                assert eval_knowledge(system, Point(run, m), phi) == want


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 300), st.integers(0, 30), st.data())
def test_backends_agree(seed, pseed, data):
    ctx = random_context(seed, max_runs=300)
    interp = random_interpretation(ctx)
    proto = random_protocol(ctx, pseed)
    a = ExtendedContext(ctx, interp, backend="explicit").system(proto)
    b = ExtendedContext(ctx, interp, backend="lazy").system(proto)
    phi = data.draw(oracles.formulas(*vocabulary(ctx), temporal=False))
    for run in generate_universe(ctx):
        for m in range(ctx.horizon):
            assert a.evaluator.holds(phi, run, m) == b.evaluator.holds(phi, run, m)


def _system(seed=5, pseed=1):
    ctx = random_context(seed, max_runs=300)
    interp = random_interpretation(ctx)
    proto = random_protocol(ctx, pseed)
    return ctx, ExtendedContext(ctx, interp).system(proto)


def test_horizon_errors():
    ctx, system = _system()
    run = generate_universe(ctx)[0]
    a = ctx.agents[0]
    T = ctx.horizon
    with pytest.raises(HorizonError):
        system.evaluator.holds(Next(Const(True)), run, T)
    with pytest.raises(HorizonError):
        system.evaluator.holds(DoAtom(a, "skip"), run, T)
    with pytest.raises(HorizonError):
        system.evaluator.holds(Counterfactual(DoAtom(a, "skip"), Const(True)), run, T)
    with pytest.raises(IllegalInput):
        system.evaluator.holds(Const(True), run, T + 1)


def test_bad_inputs():
    ctx, system = _system()
    run = generate_universe(ctx)[0]
    with pytest.raises(UnsupportedAntecedent):
        system.evaluator.holds(Counterfactual(Prop("e"), Const(True)), run, 0)
    with pytest.raises(UnknownProposition):
        system.evaluator.holds(Prop("nosuch"), run, 0)
    with pytest.raises(IllegalInput):
        eval_knowledge(InterpretedSystem([run], system.interp, ctx.horizon), Point(run, 0), Believe(ctx.agents[0], Const(True)))


def test_extension_skips_points_past_the_horizon():
    ctx, system = _system()
    pts = extension(system, Next(Const(True)))
    assert pts and all(p.time < ctx.horizon for p in pts)
    assert len(pts) == len(generate_universe(ctx)) * ctx.horizon


def test_formula_utilities():
    phi = And(Know("a", Eventually(Prop("p"))), Not(Believe("b", Prop("q"))))
    # every operator counts: And, then K/Not, then F/B
    assert modal_depth(phi) == 3
    assert modal_depth(Know("a", Know("b", Prop("p")))) == 2
    assert modal_depth(Prop("p")) == 0
    assert not in_knowledge_language(phi)
    assert in_knowledge_language(Know("a", Eventually(Prop("p"))))
    assert is_state_formula(Know("a", Eventually(Prop("p"))))
    assert not is_state_formula(Eventually(Prop("p")))
    assert to_belief(Know("a", Know("b", Prop("p")))) == Believe("a", Believe("b", Prop("p")))
    assert Prop("p") in set(subformulas(phi))
    assert hash(And(Prop("p"), Prop("q"))) == hash(And(Prop("p"), Prop("q")))


@settings(max_examples=50, deadline=None)
@given(st.data())
def test_to_belief_removes_knowledge(data):
    phi = data.draw(oracles.formulas(("a", "b"), ("p", "q"), {"a": {"skip"}, "b": {"skip", "x"}}, belief=False, counterfactual=False))
    out = to_belief(phi)
    assert not any(isinstance(f, Know) for f in subformulas(out))
    assert modal_depth(out) == modal_depth(phi)


def test_knowledge_over_an_empty_system_is_vacuous():
    ctx = random_context(5)
    interp = random_interpretation(ctx)
    a = ctx.agents[0]
    system = InterpretedSystem([], interp, ctx.horizon)
    loc = ctx.initial_states[0].local(a)
    assert system.evaluator.holds_local(Know(a, Prop(f"v{a}")), a, loc)
    assert system.evaluator.holds_local(Know(a, Const(False)), a, loc)
