"""Acceptance suite: one test and one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v`` or directly as a script.
"""

from __future__ import annotations

import json
import sys

import pytest

from stickflow.acceptance import CRITERIA, run_all


@pytest.mark.parametrize("criterion", CRITERIA, ids=[f"criterion_{i + 1:02d}" for i in range(len(CRITERIA))])
def test_criterion(criterion, capsys):
    res = criterion()
    with capsys.disabled():
        print("\n" + res.line())
    assert res.passed, json.dumps(res.details, default=str, indent=2)


if __name__ == "__main__":
    results = run_all()
    sys.exit(0 if all(r.passed for r in results) else 1)
