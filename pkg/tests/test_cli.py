from __future__ import annotations

import json
import subprocess
import sys

import pytest

from cbbcheck.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_runs_counts(capsys):
    code, out, _ = run(capsys, "runs", "--context", "gamma1", "--protocol", "P1:0,0")
    assert code == 0 and out.startswith("10 runs")
    code, out, _ = run(capsys, "runs", "--context", "kind=gamma1 horizon=8 max_delay=5", "--protocol", "P2:0,0", "--traces")
    assert code == 0 and out.startswith("6 runs") and out.count("run ") >= 6


def test_runs_of_random_context_universe(capsys):
    code, out, _ = run(capsys, "runs", "--context", "kind=random seed=3", "--universe")
    assert code == 0 and "runs (universe" in out


def test_check_pass_fail_and_stability(capsys):
    code, out, _ = run(capsys, "check", "--context", "gamma1", "--horizon", "10", "--protocol", "P1:0,2", "--program", "Pgbt_gt", "--horizons", "10,12")
    assert code == 0 and out.count("PASS") == 2
    code, out, _ = run(capsys, "check", "--context", "gamma1_fast", "--protocol", "P1:0,0", "--program", "BTprime")
    assert code == 1 and "FAIL" in out and "first reached at time" in out


def test_check_belief_version_and_program_file(capsys, tmp_path):
    from cbbcheck.bittrans import make_program
    from cbbcheck.dsl import format_program

    path = tmp_path / "bt.cbp"
    path.write_text(format_program(make_program("BTprime")))
    for program in ("BTprime^B", str(path)):
        code, _, _ = run(capsys, "check", "--context", "gamma1_fast", "--protocol", "PI:0,1", "--program", program)
        assert code == 0


def test_search(capsys):
    code, out, _ = run(capsys, "search", "--context", "gamma1_fast", "--program", "BTprime", "--family", "sendsets:2")
    assert code == 0 and "P({0,1},{0,1})" in out


def test_eval_reports_value_and_witnesses(capsys):
    code, out, _ = run(capsys, "eval", "--context", "gamma1_fast", "--protocol", "P1:0,0", "--formula", "B[R] bit=0", "--run", "0,2", "--time", "3")
    assert code == 0 and "true" in out and "min_rank_class" in out
    code, out, _ = run(capsys, "eval", "--context", "gamma1_fast", "--protocol", "P1:0,0", "--formula", "do(S,skip) > F recbit", "--run", "0", "--time", "0")
    assert code == 0 and "closest" in out


@pytest.mark.parametrize(
    "argv, code",
    [
        (["runs", "--context", "nosuch", "--protocol", "P1:0,0"], 2),
        (["runs", "--context", "kind=gamma1 horizon=2", "--protocol", "P1:0,0"], 2),
        (["runs", "--context", "gamma1", "--protocol", "P9:1"], 2),
        (["eval", "--context", "gamma1_fast", "--protocol", "P1:0,0", "--formula", "p &"], 2),
        (["eval", "--context", "gamma1_fast", "--protocol", "P1:0,0", "--formula", "K[Q] recbit"], 2),
        (["check", "--context", "gamma1_fast", "--protocol", "P1:0,0", "--program", "Nope"], 2),
        (["paper", "nosuch"], 2),
        (["paper", "safe", "--horizons", "8,10"], 2),
        (["runs", "--context", "gamma1", "--universe", "--cap", "1000"], 3),
        (["eval", "--context", "gamma1_fast", "--protocol", "P1:0,0", "--formula", "X true", "--time", "6"], 4),
    ],
)
def test_exit_codes(capsys, argv, code):
    got, _, err = run(capsys, *argv)
    assert got == code
    assert err.startswith("error:")


def test_usage_errors_exit_nonzero(capsys):
    assert main(["runs"]) == 2
    assert main(["--help"]) == 0


def test_claim_json_is_reproducible(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        code, out, _ = run(capsys, "paper", "run-shapes", "--json", str(path))
        assert code == 0 and out.startswith("PASS run-shapes")
    # argv differs only in the output path
    da, db = json.loads(a.read_text()), json.loads(b.read_text())
    da.pop("argv"), db.pop("argv")
    assert da == db
    report = da["reports"][0]
    assert report["passed"] and report["stable"]
    assert "s)" not in a.read_text()


def test_json_to_stdout(capsys):
    code, out, _ = run(capsys, "runs", "--context", "gamma1", "--protocol", "P2:0,0", "--json", "-")
    assert code == 0
    data = json.loads(out)
    assert data["runs"] == 6 and data["exit_code"] == 0


def test_claim_params_and_verbose(capsys):
    code, out, _ = run(capsys, "paper", "zeta-char21", "--param", "k=0", "--param", "m=2", "-v")
    assert code == 0 and "[T=12]" in out
    code, _, err = run(capsys, "paper", "zeta-char21", "--param", "oops")
    assert code == 2 and "key=value" in err


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "cbbcheck", "runs", "--context", "gamma1", "--protocol", "P1:0,0"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0 and proc.stdout.startswith("10 runs")
