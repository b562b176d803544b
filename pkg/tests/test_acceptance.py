"""The thirteen acceptance criteria, each re-run at ``T`` and ``T+2``.

One line per criterion is printed in the terminal summary.
"""
from __future__ import annotations

import pytest

from cbbcheck.bittrans import reproduce

from conftest import ACCEPTANCE

# criterion -> list of (claim, params, reproduce keyword arguments)
CRITERIA = {
    "1 run-shapes": [("run-shapes", {}, {})],
    "2 pbR-imp": [("pbR-imp", {}, {})],
    "3 zeta-char1": [("zeta-char1", {}, {})],
    "4 zeta-char21": [("zeta-char21", {}, {})],
    "5 zeta-char2": [("zeta-char2", {}, {})],
    "6 procra": [("procra", {}, {})],
    "7 zeta-char3": [("zeta-char3", {}, {})],
    "8 safe+imp-thm": [("safe", {}, {}), ("imp-thm", {}, {})],
    "9 no-impl": [("no-impl-BTstar", {}, {}), ("no-impl-BTarrow", {}, {})],
    "10 genthm": [("genthm", {}, {})],
    "11 knowledge-axiom": [("knowledge-axiom", {}, {})],
    "12 b-imp+weakimp": [
        ("b-imp", {}, {}),
        ("b-imp", {"horizon": 8, "max_delay": 5}, {}),
        ("b-imp", {"rank": "deviations"}, {}),
        ("weakimp", {}, {}),
        ("weakimp", {"horizon": 8, "max_delay": 5}, {}),
        # the uncapped deviation rank is run at T only; see the notes
        ("weakimp", {"rank": "deviations"}, {"stability": False}),
    ],
    "13 dsl-roundtrip": [("dsl-roundtrip", {}, {})],
}


@pytest.mark.parametrize("criterion", list(CRITERIA))
def test_criterion(criterion):
    failed = []
    labels = []
    for claim, params, kwargs in CRITERIA[criterion]:
        report = reproduce(claim, params, **kwargs)
        labels.append(f"{claim}[{','.join(report.horizons)}]")
        if not report.passed:
            failed.append(report.render())
    ACCEPTANCE[criterion] = (not failed, " ".join(labels))
    assert not failed, "\n".join(failed)
