"""Acceptance criteria, one test per criterion, each at its stated tolerance.

A pass/fail line per criterion is printed as it runs and collected into the
terminal summary.  Criteria that fail are left failing; the measured values
are in the printed line and diagnostics.
"""

import pytest

import conftest
from returnmap.acceptance import CRITERIA, run_criterion


@pytest.fixture(scope="module")
def out_dir(tmp_path_factory):
    return tmp_path_factory.mktemp("acceptance")


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, out_dir, capsys):
    r = run_criterion(number, out=out_dir)
    conftest.ACCEPTANCE_LINES.append(r.line())
    with capsys.disabled():
        print("\n" + r.line())
        if r.diagnostics:
            for line in r.diagnostics.splitlines():
                print("    " + line)
    assert r.passed, r.line()
