import pytest

from liouville import geometry as geo
from liouville import verify
from liouville.cli import RunConfig
from liouville.verify import COARSE, FAIL, INFO, PASS, Check, SuiteResult


def _c(status):
    return Check("x", "g", 0.0, 1.0, status)


@pytest.mark.parametrize("statuses,code", [
    ([PASS, INFO], 0), ([PASS, COARSE], 4), ([COARSE, FAIL], 1), ([FAIL, PASS], 1), ([], 0),
])
def test_exit_code_precedence(statuses, code):
    assert SuiteResult([_c(s) for s in statuses], {}).exit_code == code


def test_resolution_limit():
    assert verify.resolution_limit(geo.circle()) == pytest.approx(1.05 * geo.circle().reach_estimate / 32)
    assert verify.resolution_limit(geo.HalfPlane((0, 1, 0, 1))) == pytest.approx(1.05 / 32)


def test_flat_strip_suite_passes(tmp_path):
    hp = geo.HalfPlane((0.0, 1.0, 0.0, 1.0))
    cfg = RunConfig(domain="strip", out=str(tmp_path), h_grid=1 / 64)
    res = verify.run_suite(hp, cfg)
    bad = [c for c in res.checks if c.status not in (PASS, INFO)]
    assert res.exit_code == 0, bad
    assert "convergence.csv" in res.tables
