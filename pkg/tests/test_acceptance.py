"""Acceptance battery: one test per criterion, each printing a PASS/FAIL line
with every checked statistic against its threshold."""
import pytest

from ssmpkit.acceptance import CRITERIA, DEFAULT_SEED, run_criterion


@pytest.mark.slow
@pytest.mark.parametrize("k", sorted(CRITERIA))
def test_criterion(k, capsys):
    c = run_criterion(k, DEFAULT_SEED)
    with capsys.disabled():
        print(f"\n{c.line()}  ({c.seconds:.0f} s)")
    for r in c.reports:
        assert r.passed, r.line()
