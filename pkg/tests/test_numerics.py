"""Quadrature, cutoffs, Hoelder seminorms and the numba/numpy kernel pairs."""

import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from liouville import kernels, quadrature
from liouville import geometry as geo
from liouville.holder import holder_seminorm


def test_adaptive_simpson():
    assert quadrature.adaptive_simpson(np.sin, 0, np.pi) == pytest.approx(2.0, abs=1e-10)
    assert quadrature.adaptive_simpson(lambda x: 1 / x, 1, np.e) == pytest.approx(1.0, abs=1e-10)


def test_adaptive_simpson_vec_independent_panels():
    a = np.array([0.0, 1.0, 2.0])
    b = np.array([1.0, 3.0, 2.5])
    out = quadrature.adaptive_simpson_vec(lambda x, owner: x ** 3, a, b, 1e-12)
    assert np.allclose(out, (b ** 4 - a ** 4) / 4, atol=1e-10)


@given(st.floats(-0.5, 1.5))
def test_cutoffs(tau):
    for fn in (quadrature.smooth_cutoff, quadrature.smooth_cutoff_inf):
        val = np.atleast_1d(fn(np.array([tau])))[0] if fn is quadrature.smooth_cutoff \
            else fn(np.array([tau]))[0][0]
        assert -1e-15 <= val <= 1 + 1e-15
        if tau <= 0:
            assert val == pytest.approx(1.0)
        if tau >= 1:
            assert val == pytest.approx(0.0, abs=1e-15)


def test_cutoff_integral():
    tau = np.array([-1.0, 0.0, 0.5, 1.0, 2.0])
    out = quadrature.cutoff_integral(tau)
    assert out[0] == -1.0 and out[-1] == pytest.approx(0.5)
    chi = lambda x: quadrature.smooth_cutoff_inf(x)[0]
    for t in (0.3, 0.5, 0.9):
        ref = quadrature.adaptive_simpson(chi, 0.0, t, tol=1e-13)
        assert quadrature.cutoff_integral(np.array([t]))[0] == pytest.approx(ref, abs=1e-12)
    assert out[3] == pytest.approx(0.5, abs=1e-14)


def test_holder_power_law():
    T = np.linspace(0, 1, 401)
    pts = np.stack([T, 0 * T], axis=1)
    assert holder_seminorm((pts, np.sqrt(T)), 0.5).seminorm == pytest.approx(1.0, abs=1e-12)
    assert holder_seminorm((pts, T), 0.5).seminorm == pytest.approx(1.0, abs=1e-12)
    assert holder_seminorm((pts, np.ones_like(T)), 0.5).seminorm == 0.0


def test_holder_sampled_is_deterministic():
    rng = np.random.default_rng(0)
    pts = rng.random((20000, 2))
    vals = np.sin(3 * pts[:, 0]) * pts[:, 1]
    a = holder_seminorm((pts, vals), 0.5, seed=3, n_random=100_000)
    b = holder_seminorm((pts, vals), 0.5, seed=3, n_random=100_000)
    assert a.seminorm == b.seminorm and not a.exhaustive


# ---------------------------------------------------------------------------
# kernel pairs
# ---------------------------------------------------------------------------

needs_numba = pytest.mark.skipif(not kernels.HAVE_NUMBA, reason="numba not importable")


@pytest.fixture(scope="module")
def operator():
    from liouville import solver

    g = geo.build_grid(geo.circle(), 1 / 32, 0.05)
    return solver.assemble(solver.DirichletProblem(g, solver.expansion_data(2), lift=True))


@needs_numba
def test_matvec_pair(operator):
    x = np.random.default_rng(0).standard_normal(operator.n)
    a = kernels.matvec_nb(operator.diag, operator.nbr, operator.coef, x)
    b = kernels.matvec_np(operator.diag, operator.nbr, operator.coef, x)
    assert np.allclose(a, b, rtol=1e-13, atol=1e-12 * np.max(np.abs(b)))


@needs_numba
def test_bicgstab_pair(operator):
    b = np.random.default_rng(1).standard_normal(operator.n)
    jd = operator.diag + 8.0
    x1, _, r1, f1 = kernels.bicgstab_nb(jd, operator.nbr, operator.coef, b, np.zeros_like(b), 1e-12, 5000)
    x2, _, r2, f2 = kernels.bicgstab_np(jd, operator.nbr, operator.coef, b, np.zeros_like(b), 1e-12, 5000)
    assert f1 == f2 == kernels.CONVERGED
    assert np.allclose(x1, x2, rtol=1e-8, atol=1e-10)
    res = kernels.matvec_np(jd, operator.nbr, operator.coef, x1) - b
    assert np.linalg.norm(res) <= 1e-10 * np.linalg.norm(b)


@needs_numba
def test_holder_quotient_pair():
    rng = np.random.default_rng(2)
    pts, vals = rng.random((300, 2)), rng.standard_normal((300, 3))
    ii, jj = rng.integers(0, 300, 5000), rng.integers(0, 300, 5000)
    a = kernels.holder_quotients_nb(vals, pts, ii, jj, 0.5)
    b = kernels.holder_quotients_np(vals, pts, ii, jj, 0.5)
    assert np.allclose(a, b, rtol=1e-13)


@needs_numba
def test_tilde_pair():
    t = np.log(0.2) + np.linspace(-6, 0, 40)
    K = np.exp(t)[:, None] * np.cos(np.arange(8))[None, :]
    a = quadrature.tilde_log_grid_nb(K, t, 0.2, 1e-10)
    b = quadrature.tilde_log_grid_np(K, t, 0.2, 1e-10)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-14)


def test_env_flag_selects_numpy():
    code = "from liouville import kernels; print(kernels.backend())"
    env = dict(os.environ, LIOUVILLE_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "numpy"
    env["LIOUVILLE_DISABLE_NUMBA"] = "0"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == ("numba" if kernels.HAVE_NUMBA else "numpy")


def test_numpy_backend_solve_matches():
    """A small trimmed solve gives the same field on both backends."""
    code = ("import numpy as np; from liouville import geometry as g, solver as s; "
            "u,r=s.trimmed_solve(g.circle(),0.1,2,1/16); print(repr(float(np.nansum(u.values))))")
    outs = []
    for flag in ("1", "0"):
        env = dict(os.environ, LIOUVILLE_DISABLE_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
        assert res.returncode == 0, res.stderr
        outs.append(float(res.stdout))
    assert outs[0] == pytest.approx(outs[1], rel=1e-10)
