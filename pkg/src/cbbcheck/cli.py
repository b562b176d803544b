"""Command-line entry point.

Subcommands: ``runs``, ``eval``, ``check``, ``search`` and ``paper``.
Each prints a human report; ``--json PATH`` (``-`` for stdout) also
writes a machine-readable report with sorted keys and no timing, so equal
invocations give byte-identical files.

Exit codes: 0 pass, 1 FAIL, 2 bad input, 3 enumeration cap hit,
4 evaluation past the horizon.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import replace
from importlib import resources
from typing import Any, Sequence

from . import dsl
from .bittrans import (
    CLAIM_SUMMARIES,
    CLAIMS,
    BitContextSpec,
    InvalidSpec,
    UnknownClaim,
    UnknownName,
    bit_interpretation,
    claim_defaults,
    family_from_name,
    first_receipt,
    make_program,
    protocol_from_name,
    reproduce,
)
from .logic import (
    Believe,
    Counterfactual,
    DoAtom,
    Formula,
    HorizonError,
    IllegalInput,
    Know,
    LogicError,
    Not,
    random_interpretation,
)
from .model import (
    Context,
    Explosion,
    ModelError,
    Protocol,
    Run,
    format_local,
    format_run,
    generate_runs,
    generate_universe,
    maximal_protocol,
    random_protocol,
    skip_protocol,
)
from .programs import (
    Program,
    ProgramError,
    de_facto_implements,
    derive_protocol_std,
    implements,
    program_to_belief,
)
from .ranking import ExtendedContext, characteristic_rank, deviation_count_rank

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_EXPLOSION, EXIT_HORIZON = 0, 1, 2, 3, 4

PRESETS = ("gamma1", "gamma1_fast", "gamma2", "gamma3")
RANKS = {"characteristic": characteristic_rank, "deviations": deviation_count_rank}


class InputError(Exception):
    """Command-line input that cannot be resolved."""


# ---------------------------------------------------------------------------
# Resolving arguments


def _data_text(name: str) -> str:
    return resources.files("cbbcheck").joinpath("data", name).read_text(encoding="utf-8")


def load_context_spec(text: str, horizon: int | None = None, seed: int | None = None):
    """A context from a preset name, a ``.cbc`` file or inline ``key=value`` text."""
    if text in PRESETS:
        spec = dsl.parse_context(dsl.SourceText(_data_text(f"{text}.cbc"), f"{text}.cbc"))
    elif os.path.exists(text):
        spec = dsl.load_context(text)
    elif "=" in text:
        spec = dsl.parse_context(text)
    else:
        raise InputError(f"no context preset or file named {text!r} (presets: {', '.join(PRESETS)})")
    if seed is not None and isinstance(spec, dsl.RandomContextSpec):
        spec = replace(spec, seed=seed)
    if horizon is not None:
        if isinstance(spec, dsl.RandomContextSpec):
            raise InputError("--horizon does not apply to random contexts")
        spec = replace(spec, horizon=horizon)
        spec.validate()
    return spec


def _interp_for(spec, ctx: Context):
    return random_interpretation(ctx) if isinstance(spec, dsl.RandomContextSpec) else bit_interpretation()


def load_program_arg(text: str, ctx: Context | None = None) -> Program:
    """A built-in program name (``^B`` for the belief version) or a ``.cbp`` file."""
    if os.path.exists(text):
        return dsl.load_program(text, ctx)
    if text.endswith("^B"):
        return program_to_belief(make_program(text[:-2]))
    return make_program(text)


def load_protocol_arg(text: str, ctx: Context, interp) -> Protocol:
    """Built-in protocol names, ``RAND:seed``, ``MAX``, or a standard program file."""
    if os.path.exists(text):
        program = dsl.load_program(text, ctx)
        return derive_protocol_std(program, interp)
    if text.startswith("RAND:"):
        try:
            return random_protocol(ctx, int(text[5:]))
        except ValueError as exc:
            raise InputError(f"bad random protocol {text!r}") from exc
    if text == "MAX":
        return maximal_protocol(ctx)
    if text == "SKIP":
        return skip_protocol()
    return protocol_from_name(text)


def _horizons(text: str | None) -> list[int] | None:
    if not text:
        return None
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise InputError(f"bad horizon list {text!r}") from exc


def _specs(args) -> list[Any]:
    """The context at the requested horizons (``--horizons`` wins over ``--horizon``)."""
    hs = _horizons(getattr(args, "horizons", None))
    if not hs:
        return [load_context_spec(args.context, args.horizon, args.seed)]
    return [load_context_spec(args.context, h, args.seed) for h in hs]


def _zeta(spec, rank: str) -> ExtendedContext:
    ctx = dsl.build_context(spec)
    return ExtendedContext(ctx, _interp_for(spec, ctx), rank=RANKS[rank])


def _spec_params(spec) -> dict[str, Any]:
    if isinstance(spec, BitContextSpec):
        return spec.params()
    return {"kind": "random", "seed": spec.seed}


def _sorted_runs(runs: Sequence[Run]) -> list[Run]:
    return sorted(runs, key=format_run)


# ---------------------------------------------------------------------------
# Reports


class Output:
    def __init__(self, command: str, argv: Sequence[str]):
        self.data: dict[str, Any] = {"command": command, "argv": list(argv)}
        self.lines: list[str] = []

    def say(self, text: str = "") -> None:
        self.lines.append(text)


def _cex_payload(verdict, spec, protocol: Protocol, program: Program) -> dict[str, Any] | None:
    cex = verdict.counterexample
    if cex is None:
        return None
    tests = [str(c.test) for c in program.for_agent(cex.agent)]
    out = {
        "context": _spec_params(spec),
        "protocol": str(protocol),
        "program": program.name,
        "agent": cex.agent,
        "local": format_local(cex.local) if cex.local is not None else None,
        "expected": sorted(cex.expected),
        "actual": sorted(cex.actual),
        "formula": tests[0] if tests else None,
        "point": None,
    }
    if cex.point is not None:
        out["point"] = {"time": cex.point.time, "run": format_run(cex.point.run).splitlines()}
    return out


# ---------------------------------------------------------------------------
# Commands


def cmd_runs(args, out: Output) -> int:
    spec = load_context_spec(args.context, args.horizon, args.seed)
    ctx = dsl.build_context(spec)
    if args.universe:
        runs = generate_universe(ctx, args.cap)
        label = "universe"
    else:
        if not args.protocol:
            raise InputError("runs needs --protocol unless --universe is given")
        protocol = load_protocol_arg(args.protocol, ctx, _interp_for(spec, ctx))
        runs = generate_runs(protocol, ctx, args.cap)
        label = str(protocol)
    runs = _sorted_runs(runs)
    out.data.update({"context": _spec_params(spec), "source": label, "runs": len(runs)})
    out.say(f"{len(runs)} runs ({label}, {spec.kind if hasattr(spec, 'kind') else 'random'} T={ctx.horizon})")
    if args.traces:
        out.data["traces"] = [format_run(r).splitlines() for r in runs]
        for i, r in enumerate(runs):
            out.say(f"run {i}:")
            out.say("  " + format_run(r).replace("\n", "\n  "))
    return EXIT_OK


def _select_run(runs: list[Run], text: str) -> Run:
    if "," in text:
        b, _, n = text.partition(",")
        want_n = None if n.strip() in ("none", "-") else int(n)
        for r in runs:
            if r[0].local("S").var("bit") == int(b) and first_receipt(r[-1].local("R")) == want_n:
                return r
        raise InputError(f"no run with bit {b} and first receipt {n}")
    i = int(text)
    if not 0 <= i < len(runs):
        raise InputError(f"run index {i} out of range (0..{len(runs) - 1})")
    return runs[i]


def _witness_sizes(system, phi: Formula, run: Run, m: int) -> dict[str, int]:
    """Sizes of the belief class and closest set behind the outermost operators."""
    root = phi
    while isinstance(root, Not):
        root = root.sub
    sizes: dict[str, int] = {}
    if isinstance(root, (Believe, Know)):
        local = run[m].local(root.agent)
        if isinstance(root, Believe):
            pts = system.belief_points(root.agent, local, False)
            sizes["min_rank_class"] = sum(1 for _ in pts)
        else:
            sizes["indistinguishable"] = sum(1 for _ in system.knowledge_points(root.agent, local, False))
        root = root.sub
        while isinstance(root, Not):
            root = root.sub
    if isinstance(root, Counterfactual) and isinstance(root.antecedent, DoAtom) and m < system.horizon:
        ante = root.antecedent
        sizes["closest"] = len(system.closest(ante.agent, ante.action, run, m))
    return sizes


def cmd_eval(args, out: Output) -> int:
    spec = load_context_spec(args.context, args.horizon, args.seed)
    zeta = _zeta(spec, args.rank)
    ctx = zeta.ctx
    protocol = load_protocol_arg(args.protocol, ctx, zeta.interp)
    text = args.formula
    if text.startswith("@"):
        phi = dsl.parse_formula(dsl.SourceText.from_file(text[1:]), agents=ctx.agents, actions=ctx.action_sets)
    else:
        phi = dsl.parse_formula(text, agents=ctx.agents, actions=ctx.action_sets)
    system = zeta.system(protocol)
    runs = _sorted_runs(system.runs)
    if not runs:
        raise InputError("the protocol has no runs in this context")
    run = _select_run(runs, args.run)
    m = args.time
    if not 0 <= m <= ctx.horizon:
        raise InputError(f"time {m} outside 0..{ctx.horizon}")
    value = system.evaluator.holds(phi, run, m)
    sizes = _witness_sizes(system, phi, run, m)
    out.data.update(
        {
            "context": _spec_params(spec),
            "protocol": str(protocol),
            "formula": str(phi),
            "ranking": args.rank,
            "point": {"time": m, "run": format_run(run).splitlines()},
            "value": value,
            "witnesses": sizes,
        }
    )
    out.say(f"{phi} at time {m}: {'true' if value else 'false'}")
    for k, v in sorted(sizes.items()):
        out.say(f"  {k}: {v}")
    return EXIT_OK


def cmd_check(args, out: Output) -> int:
    verdicts = []
    ok = True
    for spec in _specs(args):
        zeta = _zeta(spec, args.rank)
        protocol = load_protocol_arg(args.protocol, zeta.ctx, zeta.interp)
        program = load_program_arg(args.program, zeta.ctx)
        fn = implements if args.strict else de_facto_implements
        v = fn(protocol, program, zeta)
        ok = ok and v.holds
        verdicts.append(
            {
                "context": _spec_params(spec),
                "horizon": zeta.ctx.horizon,
                "holds": v.holds,
                "note": v.guard_note,
                "counterexample": _cex_payload(v, spec, protocol, program),
            }
        )
        mode = "implements" if args.strict else "de facto implements"
        out.say(f"T={zeta.ctx.horizon}: {protocol} {mode} {program.name}: {'PASS' if v.holds else 'FAIL'} ({v.guard_note})")
        cex = verdicts[-1]["counterexample"]
        if cex:
            out.say(f"  at {cex['agent']} {cex['local']}: program says {cex['expected']}, protocol does {cex['actual']}")
            out.say(f"  test: {cex['formula']}")
            if cex["point"]:
                out.say(f"  first reached at time {cex['point']['time']} of run:")
                out.say("    " + "\n    ".join(cex["point"]["run"]))
    stable = len({v["holds"] for v in verdicts}) == 1
    if not stable:
        out.say("verdicts differ between horizons")
    out.data.update(
        {
            "protocol": args.protocol,
            "program": args.program,
            "ranking": args.rank,
            "strict": args.strict,
            "verdicts": verdicts,
            "stable": stable,
            "passed": ok and stable,
        }
    )
    return EXIT_OK if ok and stable else EXIT_FAIL


def cmd_search(args, out: Output) -> int:
    results = []
    for spec in _specs(args):
        zeta = _zeta(spec, args.rank)
        program = load_program_arg(args.program, zeta.ctx)
        family = family_from_name(args.family, zeta.ctx)
        found = [str(p) for p in family if de_facto_implements(p, program, zeta).holds]
        results.append({"context": _spec_params(spec), "candidates": len(family), "implementations": found})
        out.say(f"T={zeta.ctx.horizon}: {len(found)} implementations of {program.name} among {len(family)} candidates")
        for name in found:
            out.say(f"  {name}")
    stable = len({tuple(r["implementations"]) for r in results}) == 1
    if not stable:
        out.say("results differ between horizons")
    out.data.update(
        {"program": args.program, "family": args.family, "ranking": args.rank, "results": results, "stable": stable}
    )
    return EXIT_OK if stable else EXIT_FAIL


def _claim_params(args) -> dict[str, Any]:
    params: dict[str, Any] = {}
    for item in args.param or []:
        key, eq, value = item.partition("=")
        if not eq:
            raise InputError(f"--param expects key=value, got {item!r}")
        params[key.strip()] = value.strip()
    if args.horizon is not None:
        params["horizon"] = args.horizon
    if args.rank_given:
        params["rank"] = args.rank
    if args.seed is not None:
        params["seed"] = args.seed
    return params


def cmd_paper(args, out: Output) -> int:
    claims = list(CLAIMS) if args.claim == "all" else [args.claim]
    if args.claim != "all" and args.claim not in CLAIMS:
        raise UnknownClaim(f"unknown claim {args.claim!r}; known: all, {', '.join(CLAIMS)}")
    base = _claim_params(args)
    horizons = _horizons(args.horizons)
    reports = []
    ok = True
    for claim in claims:
        params = dict(base)
        if args.claim == "all":
            # shared overrides only apply where a claim takes them
            defaults = claim_defaults(claim)
            params = {k: v for k, v in params.items() if k in defaults}
        started = time.perf_counter()
        report = reproduce(
            claim,
            params,
            horizons=horizons if args.claim != "all" else None,
            stability=not args.no_stability,
        )
        elapsed = time.perf_counter() - started
        ok = ok and report.passed
        reports.append(report.to_dict())
        out.say(report.render() if args.verbose or not report.passed else report.render().splitlines()[0])
        out.say(f"  ({CLAIM_SUMMARIES[claim]}; {elapsed:.1f}s)")
    out.data.update({"claim": args.claim, "reports": reports, "passed": ok})
    out.say(f"{'PASS' if ok else 'FAIL'}: {sum(r['passed'] for r in reports)}/{len(reports)} claims")
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------------------
# Argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cbbcheck", description="Model checker for belief-based programs.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, context=True):
        if context:
            p.add_argument("--context", required=True, help="preset, .cbc file or inline key=value text")
        p.add_argument("--horizon", type=int, help="override the context horizon")
        p.add_argument("--seed", type=int, help="seed for random contexts")
        p.add_argument("--rank", choices=sorted(RANKS), default="characteristic")
        p.add_argument("--json", metavar="PATH", help="write the machine report ('-' for stdout)")
        p.add_argument("--cap", type=int, default=None, help="enumeration cap")

    p = sub.add_parser("runs", help="count (and list) runs of a protocol or the universe")
    common(p)
    p.add_argument("--protocol", help="e.g. P1:0,0  P2:0,0  PI:0,2/1  Pomega  BT  SKIP  RAND:3  MAX or a .cbp file")
    p.add_argument("--universe", action="store_true", help="enumerate every run of the context")
    p.add_argument("--traces", action="store_true", help="print every run")
    p.set_defaults(func=cmd_runs)

    p = sub.add_parser("eval", help="evaluate a formula at a point of the protocol's system")
    common(p)
    p.add_argument("--protocol", required=True)
    p.add_argument("--formula", required=True, help="formula text, or @file")
    p.add_argument("--run", default="0", help="run index (sorted order) or bit,receipt such as 0,3")
    p.add_argument("--time", type=int, default=0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("check", help="does a protocol (de facto) implement a program")
    common(p)
    p.add_argument("--protocol", required=True)
    p.add_argument("--program", required=True, help="built-in name (NAME^B for the belief version) or .cbp file")
    p.add_argument("--horizons", help="comma-separated horizons for a stability check")
    p.add_argument("--strict", action="store_true", help="compare on every universe state")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("search", help="family members that de facto implement a program")
    common(p)
    p.add_argument("--program", required=True)
    p.add_argument("--family", default="window", help="sendsets:N, sendsets1:N or window")
    p.add_argument("--horizons")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("paper", help="reproduce a claim, or 'all' of them")
    common(p, context=False)
    p.add_argument("claim", help="claim id or 'all'")
    p.add_argument("--horizons", help="explicit horizons instead of T and T+2")
    p.add_argument("--param", action="append", help="claim parameter key=value (repeatable)")
    p.add_argument("--no-stability", action="store_true", help="skip the T+2 re-run")
    p.add_argument("--verbose", "-v", action="store_true", help="print every check")
    p.set_defaults(func=cmd_paper)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.rank_given = any(a == "--rank" or a.startswith("--rank=") for a in argv)
    out = Output(args.command, argv)
    started = time.perf_counter()
    try:
        code = args.func(args, out)
    except (dsl.DslError, InvalidSpec, UnknownName, UnknownClaim, InputError, ProgramError, IllegalInput) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Explosion as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EXPLOSION
    except HorizonError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_HORIZON
    except (LogicError, ModelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    out.data["exit_code"] = code
    if args.json != "-":
        for line in out.lines:
            print(line)
        print(f"({time.perf_counter() - started:.2f}s)")
    if args.json:
        text = json.dumps(out.data, sort_keys=True, indent=2, default=str) + "\n"
        if args.json == "-":
            sys.stdout.write(text)
        else:
            with open(args.json, "w", encoding="utf-8") as fh:
                fh.write(text)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
