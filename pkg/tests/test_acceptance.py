"""The twelve acceptance criteria at their stated tolerances.

Each criterion runs once (master seed 0) and reports a PASS/FAIL line.  The
same lines are repeated in the terminal summary.
"""

import pytest

from sac.harness.suites import CRITERIA, run_criterion

from conftest import ACCEPTANCE_LINES

_cache = {}


@pytest.fixture(scope="module")
def outdir(tmp_path_factory):
    return tmp_path_factory.mktemp("acceptance")


@pytest.mark.slow
@pytest.mark.parametrize("name", list(CRITERIA))
def test_criterion(name, outdir):
    crit = _cache.get(name) or run_criterion(name, master=0, out=outdir)
    _cache[name] = crit
    line = crit.line()
    ACCEPTANCE_LINES[crit.number] = line
    print(line)
    assert crit.checks, f"{name} produced no checks"
    failed = [c for c in crit.checks if not c.passed]
    assert not failed, "; ".join(f"{c.rule} = {c.value:.4g} ({c.bound})" for c in failed)
