from __future__ import annotations

from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cbbcheck.bittrans import (
    BitContextSpec,
    InvalidSpec,
    UnknownName,
    _compatible,
    _visible,
    bias_profile,
    bit_interpretation,
    family_from_name,
    first_receipt,
    make_context,
    make_program,
    make_protocol,
    protocol_from_name,
    send_set_family,
    sender_messages,
)
from cbbcheck.model import ExplicitUniverse, generate_runs, generate_universe, maximal_protocol
from cbbcheck.programs import de_facto_implements, implements, program_to_belief
from cbbcheck.ranking import ExtendedContext, characteristic_rank, deviation_count_rank


def channel_oracle(spec, sends):
    """Receipt patterns of a sender that sends at clocks ``sends[bit]`` to a silent receiver.

    Simulates the channel directly: in each round the environment delivers
    everything in transit (this round's send included) or nothing; choices
    with nothing in transit are not distinguished.  Returns a multiset of
    ``(bit, receipt times)`` per run.
    """
    T, out = spec.horizon, Counter()
    for bit in (0, 1):
        times = [t for t in sorted(sends[bit]) if t < T]

        def walk(m, transit, receipts):
            if m == T:
                if admissible(transit, receipts, times):
                    out[(bit, tuple(receipts))] += 1
                return
            transit = transit + ([m] if m in times else [])
            if not transit:
                walk(m + 1, transit, receipts)
                return
            forced = spec.kind == "gamma1" and min(transit) + spec.max_delay <= m + 1
            walk(m + 1, [], receipts + [m + 1] * len(transit))
            if not forced:
                walk(m + 1, transit, receipts)

        walk(0, [], [])
    return out


def admissible(transit, receipts, times):
    spec = admissible.spec
    T = spec.horizon
    if spec.kind == "gamma2":
        return all(s > T - spec.slack for s in transit)
    if spec.kind == "gamma3":
        hi = T - spec.slack
        lo = hi - spec.fairness + 1
        if all(t in times for t in range(max(lo, 0), hi + 1)):
            late = [t for t in times if t >= lo]
            return len([s for s in transit if s >= lo]) < len(late)
    return True


def observed(runs):
    out = Counter()
    for r in runs:
        hist = r[-1].local("R").history
        out[(r[0].local("S").var("bit"), tuple(e.time for e in hist if e.kind == "recv"))] += 1
    return out


specs = st.one_of(
    st.builds(lambda T, d: BitContextSpec("gamma1", T, max_delay=d), st.integers(1, 7), st.integers(1, 4)),
    st.builds(lambda T, D: BitContextSpec("gamma2", T, slack=D), st.integers(1, 7), st.integers(1, 4)),
    st.builds(
        lambda T, D, F: BitContextSpec("gamma3", T, slack=D, fairness=F),
        st.integers(1, 7),
        st.integers(1, 3),
        st.integers(1, 3),
    ),
).filter(lambda s: s.horizon > s.guard)
send_sets = st.frozensets(st.integers(0, 7), max_size=5)


@settings(max_examples=200, deadline=None)
@given(specs, send_sets, send_sets)
def test_runs_match_channel_simulation(spec, i0, i1):
    admissible.spec = spec
    ctx = make_context(spec)
    runs = generate_runs(make_protocol("PI", i0, i1), ctx)
    assert observed(runs) == channel_oracle(spec, (i0, i1))


@pytest.mark.parametrize("d", [1, 2, 3, 4, 5])
def test_single_send_shapes(d):
    # one message sent at 0 arrives at one of 1..d
    ctx = make_context(BitContextSpec("gamma1", 8, max_delay=d))
    assert len(generate_runs(make_protocol("P1", 0, 0), ctx)) == 2 * d
    assert len(generate_runs(make_protocol("P2", 0, 0), ctx)) == d + 1


def test_unit_horizon_universe_hand_count():
    # per bit: nobody sends (1), one side sends (2 + 2), both send (4)
    # contexts need a horizon above the guard, so count one-round prefixes
    ctx = make_context(BitContextSpec("gamma2", 2, slack=1))
    assert len({r.states[:2] for r in generate_universe(ctx)}) == 18


def test_gamma3_persistent_sender_must_get_through():
    spec = BitContextSpec("gamma3", 10, slack=3, fairness=3)
    ctx = make_context(spec)
    runs = generate_runs(make_protocol("PI", range(8)), ctx)
    assert runs and all(first_receipt(r[-1].local("R")) is not None for r in runs)
    # stopping before the fairness window carries no obligation
    runs = generate_runs(make_protocol("PI", range(7)), ctx)
    assert any(first_receipt(r[-1].local("R")) is None for r in runs)


def test_gamma2_deadline():
    ctx = make_context(BitContextSpec("gamma2", 10, slack=5))
    runs = generate_runs(make_protocol("P1", 0, 0), ctx)
    assert len(runs) == 2 * 10
    late = generate_runs(make_protocol("P1", 6, 6), ctx)
    assert any(first_receipt(r[-1].local("R")) is None for r in late)


def test_fifo_mode_matches_batch_on_first_receipts():
    for kind, extra in (("gamma1", {"max_delay": 2}), ("gamma2", {"slack": 2}), ("gamma3", {"slack": 1, "fairness": 2})):
        for T in (3, 4, 5):
            batch = make_context(BitContextSpec(kind, T, delivery="batch", **extra))
            fifo = make_context(BitContextSpec(kind, T, delivery="fifo", **extra))
            for proto in send_set_family(3)[::7]:
                first = lambda runs: {(r[0].local("S").var("bit"), first_receipt(r[-1].local("R"))) for r in runs}
                assert first(generate_runs(proto, batch)) == first(generate_runs(proto, fifo))


def test_fifo_and_batch_verdicts_agree():
    programs = [make_program("BTprime"), program_to_belief(make_program("BTprime")), make_program("Pgbt_gt")]
    for kind, extra in (("gamma1", {"max_delay": 2}), ("gamma2", {"slack": 2})):
        batch = make_context(BitContextSpec(kind, 5, delivery="batch", **extra))
        fifo = make_context(BitContextSpec(kind, 5, delivery="fifo", **extra))
        zb = ExtendedContext(batch, bit_interpretation())
        zf = ExtendedContext(fifo, bit_interpretation())
        for proto in send_set_family(3)[::5]:
            for program in programs:
                assert de_facto_implements(proto, program, zb).holds == de_facto_implements(proto, program, zf).holds


@pytest.mark.parametrize(
    "spec",
    [
        BitContextSpec("gamma1", 3, max_delay=2),
        BitContextSpec("gamma2", 3, slack=1),
        BitContextSpec("gamma3", 3, slack=1, fairness=1),
    ],
    ids=lambda s: s.kind,
)
def test_lazy_and_explicit_verdicts_agree(spec):
    ctx = make_context(spec)
    programs = [make_program(n) for n in ("Pgbt_gt", "Pgbt_dB", "BTprime", "BTstar")]
    programs.append(program_to_belief(make_program("BTprime")))
    for rank in (characteristic_rank, deviation_count_rank):
        lazy = ExtendedContext(ctx, bit_interpretation(), rank=rank, backend="lazy")
        explicit = ExtendedContext(ctx, bit_interpretation(), rank=rank, backend="explicit")
        for proto in send_set_family(2):
            for program in programs:
                assert de_facto_implements(proto, program, lazy).holds == de_facto_implements(proto, program, explicit).holds
                assert implements(proto, program, lazy).holds == implements(proto, program, explicit).holds


def test_bias_profile_lazy_matches_explicit():
    ctx = make_context(BitContextSpec("gamma1", 3, max_delay=2))
    explicit = ExplicitUniverse(ctx)
    for proto in send_set_family(2):
        for gen in (characteristic_rank, deviation_count_rank):
            kappa = gen(proto, ctx)
            want = []
            for n in range(ctx.horizon + 1):
                row = [n]
                for b in (0, 1):
                    ranks = [
                        kappa.rank(r)
                        for r in explicit.runs
                        if r[0].local("S").var("bit") == b
                        and all(first_receipt(r[k].local("R")) is None for k in range(n + 1))
                    ]
                    row.append(min(ranks, default=float("inf")))
                want.append(tuple(row))
            assert bias_profile(kappa, ctx).rows == tuple(want)
            assert bias_profile(kappa, ctx, explicit).rows == tuple(want)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 2), st.integers(1, 2), st.randoms(use_true_random=False))
def test_prefix_compatibility_matches_visible_history(d, extra, rnd):
    T = d + extra
    ctx = make_context(BitContextSpec("gamma1", T, max_delay=d))
    runs = generate_runs(maximal_protocol(ctx), ctx)
    for _ in range(30):
        run = rnd.choice(runs)
        other = rnd.choice(runs)
        agent = rnd.choice(("S", "R"))
        t = rnd.randint(0, T)
        u = rnd.randint(t, T)
        for target_run in (run, other):
            loc, target = run[t].local(agent), target_run[u].local(agent)
            want = (
                loc.vars == target.vars
                and loc.clock <= target.clock
                and _visible(target.history, loc.clock) == loc.history
            )
            assert _compatible(loc, target) == want


def test_protocol_names():
    assert str(protocol_from_name("P1:0,2")) == "P1(0,2)"
    assert str(protocol_from_name("PI:0,1/2")) == "P({0,1},{2})"
    assert str(protocol_from_name("PI:")) == "P({})"
    assert str(protocol_from_name("Pomega")) == "Pomega"
    for bad in ("P1:0", "P1:a,b", "P2:0,3", "Nope", "P1:-1,0"):
        with pytest.raises(InvalidSpec):
            protocol_from_name(bad)
    with pytest.raises(UnknownName):
        make_program("Nope")


def test_family_names():
    ctx = make_context(BitContextSpec("gamma1", 6, max_delay=2))
    assert len(family_from_name("sendsets:3", ctx)) == 64
    assert len(family_from_name("sendsets1:3", ctx)) == 8
    assert len(family_from_name("window", ctx)) == 256
    for bad in ("sendsets:x", "sendsets:9", "mystery"):
        with pytest.raises(InvalidSpec):
            family_from_name(bad, ctx)


def test_spec_validation():
    for bad in (
        BitContextSpec("gamma4"),
        BitContextSpec("gamma1", delivery="lossy"),
        BitContextSpec("gamma1", max_delay=0),
        BitContextSpec("gamma1", horizon=-1),
    ):
        with pytest.raises(InvalidSpec):
            bad.validate()


def test_guards():
    assert BitContextSpec("gamma1", 8, max_delay=5).guard == 5
    assert BitContextSpec("gamma2", 10, slack=5).guard == 5
    assert BitContextSpec("gamma3", 9, slack=2, fairness=2).guard == 3
    assert make_context(BitContextSpec("gamma3", 7, slack=2, fairness=2)).window == 4


def test_with_horizon_rebuilds_deadlines():
    ctx = make_context(BitContextSpec("gamma2", 6, slack=2))
    longer = ctx.with_horizon(8)
    assert longer.window == 6
    direct = make_context(BitContextSpec("gamma2", 8, slack=2))
    proto = make_protocol("P1", 5, 5)
    assert len(generate_runs(proto, longer)) == len(generate_runs(proto, direct))


def test_bt_protocol_acks_and_stops():
    ctx = make_context(BitContextSpec("gamma1", 6, max_delay=1))
    runs = generate_runs(make_protocol("BT"), ctx)
    assert len(runs) == 2
    for r in runs:
        # send at 0, received at 1, ack sent at 1 and received at 2, so S sends twice
        assert sender_messages(r) == 2
        assert bit_interpretation().holds("recack", r[-1])
