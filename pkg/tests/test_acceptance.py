"""Acceptance criteria 1-10, one test each, printing one PASS/FAIL line per criterion.

Runs at reduced resolution by default; set POLYBUMP_FULL=1 for the full study.
"""

import os

import pytest

from polybump import acceptance as ac

QUICK = os.environ.get("POLYBUMP_FULL", "") != "1"


@pytest.mark.slow
@pytest.mark.parametrize("number", range(1, 11))
def test_criterion(number, capsys):
    res = ac.CRITERIA[number - 1](quick=QUICK)
    with capsys.disabled():
        print("\n" + res.line())
    assert res.number == number
    assert res.passed, res.line()
