import numpy as np
import pytest

from liouville import asymptotics as A
from liouville import fuchsian as F
from liouville import geometry as geo
from liouville import oracles, solver
from liouville.fields import FunctionSampler, GridField


def flat_sampler():
    return FunctionSampler(lambda p: 2 * p[..., 0],
                           lambda p: np.stack([2 + 0 * p[..., 0], 0 * p[..., 1]], axis=-1))


def test_disk_fit_exact(disk):
    for r0 in (1.0, 2.0):
        dom = geo.circle(radius=r0)
        fit = A.fit_expansion(oracles.RadialOracle("disk", r0), dom, [0, 0.3, 0.7], window=(0.01, 0.2))
        assert np.allclose(fit.c1(), 2.0, atol=1e-9)
        assert np.allclose(fit.c2(), -1 / r0, atol=1e-8)
        assert np.allclose(fit.kappa(), 1 / r0, atol=1e-10)
    assert "c2" in fit.to_csv().splitlines()[0]


def test_flat_fit_and_limits():
    hp = geo.HalfPlane((0.0, 1.0, 0.0, 1.0))
    fit = A.fit_expansion(flat_sampler(), hp, [0.5], window=(0.01, 0.2))
    assert fit.c1()[0] == pytest.approx(2.0, abs=1e-10)
    assert fit.c2()[0] == pytest.approx(0.0, abs=1e-8)
    g = A.gradient_limit(flat_sampler(), hp, [0.5], window=(0.01, 0.2))
    assert g[0].limit == pytest.approx(2.0, abs=1e-12)
    r = A.log_ratio_check(flat_sampler(), hp, [0.5])
    assert r[0].sup == pytest.approx(0.0, abs=1e-12)


def test_disk_gradient_and_log_ratio(disk):
    orc = oracles.RadialOracle("disk", 1.0)
    g = A.gradient_limit(orc, disk, [0.0, 0.4], window=(0.01, 0.2))
    assert all(x.limit == pytest.approx(2.0, abs=1e-10) for x in g)
    r = A.log_ratio_check(orc, disk, [0.0], window=(0.01, 0.2))
    assert r[0].sup == pytest.approx(A.disk_log_ratio_bound(1.0, (0.01, 0.2)), rel=1e-3)


def test_window_validation(disk):
    orc = oracles.RadialOracle("disk", 1.0)
    with pytest.raises(A.AnalysisError):
        A.log_ratio_check(orc, disk, [0.0], window=(0.01, 0.3))
    with pytest.raises(A.AnalysisError):
        A.fit_expansion(orc, disk, [0.0], window=(0.2, 0.1))
    with pytest.raises(A.AnalysisError):
        A.fit_expansion(orc, disk, [0.0])          # closed form: no grid spacing to choose a window
    assert A.default_window(geo.ellipse(), 1 / 128) == (1 / 64, 0.05)


def test_convergence_study_and_orders():
    t = A.convergence_study(lambda h: 3 * h * h, [0.1, 0.05, 0.025])
    assert t.min_order == pytest.approx(2.0)
    assert t.fitted_order == pytest.approx(2.0)
    assert t.to_csv().count("\n") == 4
    with pytest.raises(A.AnalysisError):
        A.convergence_study(lambda h: h, [0.1, 0.05])


def test_relative_drift():
    assert A.relative_drift([1.0, 1.1, 1.0]) == pytest.approx(0.1 / 1.1)
    assert A.relative_drift([0.0, 0.0]) == 0.0


def test_radius_identity_residual_small_for_oracle(disk):
    orc = oracles.RadialOracle("disk", 1.0)
    g = geo.build_grid(disk, 1 / 32, 0.0)
    v = GridField.from_function(g, lambda p: orc.v(p, check=False), "v")
    res = A.radius_identity_residual(v).values
    assert np.nanmax(np.abs(res)) < 1e-10


def test_envelope_and_profile_on_oracle(disk):
    ch = geo.collar_chart(disk, 0.0, 0.2, n_y=32)
    w0, _ = F.w0_fixed_point(ch)
    orc = oracles.RadialOracle("disk", 1.0)
    w = A.collar_w(orc, ch)
    assert np.allclose(w.values[:, ch.valid_y][ch.T > 1e-3], -1.0, atol=1e-6)
    env = A.envelope_constant(w, w0, 0.01)
    assert env.admits(5.0) and env.n_nodes > 0
    prof = A.regularity_profile(w, w0, 0.02, 0.2)
    assert prof["sup_w"] == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(A.AnalysisError):
        A.envelope_constant(w, w0, 0.5)


def test_ellipse_solver_fit_c2(ellipse):
    h = 1 / 64
    u, rep = solver.trimmed_solve(ellipse, h, 2, h)
    fit = A.fit_expansion(u, ellipse, [0.0, 0.125, 0.25])
    assert np.allclose(fit.c1(), 2.0, atol=0.01)
    assert np.all(np.abs(fit.c2() / -fit.kappa() - 1) < 0.1)
