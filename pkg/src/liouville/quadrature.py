"""Adaptive Simpson quadrature, vectorised over many independent integrals.

The collar construction needs one Mellin-type integral per chart node; they
are all smooth on short log-intervals, so a breadth-first adaptive Simpson
over a queue of intervals is both simple and fast.  A numba kernel does the
same job for integrands given as samples on a uniform log grid.
"""

from __future__ import annotations

import numpy as np
from scipy import special

from . import kernels


def adaptive_simpson_vec(f, a, b, tol, max_depth=48):
    """Integrate ``f`` over ``[a_i, b_i]`` for every i, to absolute ``tol_i``.

    ``f(x, owner)`` must be vectorised: ``x`` holds abscissae and ``owner`` the
    index of the integral each abscissa belongs to.  Intervals are bisected
    until the Richardson estimate ``|S2 - S1| / 15`` drops below their share
    of the tolerance, or ``max_depth`` is hit.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    n = a.shape[0]
    tol = np.broadcast_to(np.asarray(tol, dtype=float), (n,)).copy()
    owner = np.arange(n)
    result = np.zeros(n)

    m = 0.5 * (a + b)
    fa = f(a, owner)
    fm = f(m, owner)
    fb = f(b, owner)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    depth = 0
    while owner.size:
        lm = 0.5 * (a + m)
        rm = 0.5 * (m + b)
        flm = f(lm, owner)
        frm = f(rm, owner)
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        delta = left + right - whole
        done = np.abs(delta) <= 15.0 * tol
        if depth >= max_depth:
            done[:] = True
        if done.any():
            np.add.at(result, owner[done], left[done] + right[done] + delta[done] / 15.0)
        keep = ~done
        if not keep.any():
            break
        # children: left halves then right halves, same owner order
        a, m, b = (np.concatenate([a[keep], m[keep]]),
                   np.concatenate([lm[keep], rm[keep]]),
                   np.concatenate([m[keep], b[keep]]))
        fa, fm, fb = (np.concatenate([fa[keep], fm[keep]]),
                      np.concatenate([flm[keep], frm[keep]]),
                      np.concatenate([fm[keep], fb[keep]]))
        whole = np.concatenate([left[keep], right[keep]])
        tol = np.concatenate([tol[keep], tol[keep]]) * 0.5
        owner = np.concatenate([owner[keep], owner[keep]])
        depth += 1
    return result


def adaptive_simpson(f, a, b, tol=1e-10, max_depth=48):
    """Scalar convenience wrapper around :func:`adaptive_simpson_vec`."""
    g = np.vectorize(f, otypes=[float])
    return float(adaptive_simpson_vec(lambda x, _o: g(x), [a], [b], tol, max_depth)[0])


# ---------------------------------------------------------------------------
# integrands sampled on a uniform log grid
# ---------------------------------------------------------------------------

def smooth_cutoff(tau):
    """C^2 step: 1 for tau <= 0, 0 for tau >= 1 (quintic smoothstep)."""
    x = np.clip(tau, 0.0, 1.0)
    return 1.0 - x ** 3 * (10.0 - 15.0 * x + 6.0 * x * x)


def smooth_cutoff_inf(tau):
    """C-infinity step (1 for tau <= 0, 0 for tau >= 1) with its first two derivatives.

    chi = 1 - sigma(z) with z = 1/(1 - tau) - 1/tau, sigma the logistic function.
    """
    tau = np.asarray(tau, dtype=float)
    inside = (tau > 0) & (tau < 1)
    x = np.where(inside, tau, 0.5)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        z = 1.0 / (1.0 - x) - 1.0 / x
        z1 = 1.0 / (1.0 - x) ** 2 + 1.0 / x ** 2
        z2 = 2.0 / (1.0 - x) ** 3 - 2.0 / x ** 3
        sig = special.expit(z)
        s1 = sig * (1.0 - sig)
        s2 = s1 * (1.0 - 2.0 * sig)
        d1 = np.where(inside, -s1 * z1, 0.0)
        d2 = np.where(inside, -(s2 * z1 * z1 + s1 * z2), 0.0)
    chi = np.where(tau <= 0, 1.0, np.where(tau >= 1, 0.0, 1.0 - sig))
    return chi, np.nan_to_num(d1), np.nan_to_num(d2)


_CUTOFF_TABLE = None


def cutoff_integral(tau):
    """I(tau) = int_0^tau chi, chi from :func:`smooth_cutoff_inf`; I(tau) = 1/2 for tau >= 1.

    Tabulated once with 8-point Gauss-Legendre panels and evaluated by cubic
    Hermite interpolation with the exact derivative chi, accurate to roundoff.
    """
    global _CUTOFF_TABLE
    if _CUTOFF_TABLE is None:
        from scipy.interpolate import CubicHermiteSpline

        n = 4096
        edges = np.linspace(0.0, 1.0, n + 1)
        xg, wg = np.polynomial.legendre.leggauss(8)
        mid = 0.5 * (edges[1:] + edges[:-1])
        half = 0.5 * (edges[1] - edges[0])
        pts = mid[:, None] + half * xg[None, :]
        panel = half * (smooth_cutoff_inf(pts)[0] * wg[None, :]).sum(axis=1)
        vals = np.concatenate([[0.0], np.cumsum(panel)])
        _CUTOFF_TABLE = CubicHermiteSpline(edges, vals, smooth_cutoff_inf(edges)[0])
    tau = np.asarray(tau, dtype=float)
    inner = _CUTOFF_TABLE(np.clip(tau, 0.0, 1.0))
    return np.where(tau <= 0, tau, np.where(tau >= 1, 0.5, inner))


def lagrange_log(K, t, col, t0, dt):
    """Local cubic Lagrange interpolation of column ``col`` of ``K`` at ``t``.

    Below the first node the value of the first row is returned (fields on a
    log grid tend to a finite trace as T -> 0).
    """
    nt = K.shape[0]
    x = (t - t0) / dt
    m = np.clip(np.floor(x).astype(np.int64), 1, nt - 3)
    u = x - m
    w0 = -u * (u - 1.0) * (u - 2.0) / 6.0
    w1 = (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0
    w2 = -(u + 1.0) * u * (u - 2.0) / 2.0
    w3 = (u + 1.0) * u * (u - 1.0) / 6.0
    val = (w0 * K[m - 1, col] + w1 * K[m, col] + w2 * K[m + 1, col]
           + w3 * K[m + 2, col])
    return np.where(x < 0.0, K[0, col], val)


def _ext_integrand_np(s, col, K, t0, dt, theta):
    """Integrand of the log-variable Mellin integral: F1[k](e^s) e^{-s}."""
    T = np.exp(s)
    inside = T <= theta
    refl = (T > theta) & (T < 2.0 * theta)
    arg = np.where(inside, s, np.log(np.where(refl, 2.0 * theta - T, theta)))
    val = lagrange_log(K, arg, col, t0, dt)
    chi = smooth_cutoff((T - theta) / theta)
    val = np.where(inside, val, np.where(refl, chi * val, 0.0))
    return val * np.exp(-s)


def tilde_log_grid_np(K, t, theta, tol):
    """k~(t_i) = e^{t_i} * integral_{t_i}^{ln 2 theta} F1[k](e^s) e^{-s} ds per column."""
    nt, ny = K.shape
    dt = t[1] - t[0]
    t0 = t[0]
    shrink = 1.0 - np.exp(-dt)
    # pieces: rows 0..nt-2 are [t_i, t_{i+1}], row nt-1 is the extension piece
    lo = np.concatenate([t[:-1], [t[-1]]])
    hi = np.concatenate([t[1:], [t[-1] + np.log(2.0)]])
    A = np.repeat(lo, ny)
    B = np.repeat(hi, ny)
    tols = np.repeat(tol * np.exp(-lo) * shrink, ny)
    cols = np.tile(np.arange(ny), nt)

    def f(x, owner):
        return _ext_integrand_np(x, cols[owner], K, t0, dt, theta)

    pieces = adaptive_simpson_vec(f, A, B, tols).reshape(nt, ny)
    acc = np.cumsum(pieces[::-1], axis=0)[::-1]
    return np.exp(t)[:, None] * acc


if kernels.HAVE_NUMBA:
    import numba

    _jit = numba.njit(cache=True)

    @_jit
    def _lagrange_log_scalar(K, t, col, t0, dt):
        nt = K.shape[0]
        x = (t - t0) / dt
        if x < 0.0:
            return K[0, col]
        m = int(np.floor(x))
        if m < 1:
            m = 1
        if m > nt - 3:
            m = nt - 3
        u = x - m
        w0 = -u * (u - 1.0) * (u - 2.0) / 6.0
        w1 = (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0
        w2 = -(u + 1.0) * u * (u - 2.0) / 2.0
        w3 = (u + 1.0) * u * (u - 1.0) / 6.0
        return (w0 * K[m - 1, col] + w1 * K[m, col] + w2 * K[m + 1, col]
                + w3 * K[m + 2, col])

    @_jit
    def _ext_integrand_nb(s, col, K, t0, dt, theta):
        T = np.exp(s)
        if T <= theta:
            return _lagrange_log_scalar(K, s, col, t0, dt) * np.exp(-s)
        if T >= 2.0 * theta:
            return 0.0
        x = (T - theta) / theta
        chi = 1.0 - x ** 3 * (10.0 - 15.0 * x + 6.0 * x * x)
        return chi * _lagrange_log_scalar(K, np.log(2.0 * theta - T), col, t0, dt) * np.exp(-s)

    @_jit
    def _simpson_piece(a, b, tol, col, K, t0, dt, theta, max_depth):
        # explicit stack of (a, b, fa, fm, fb, whole, tol, depth)
        cap = 2 * max_depth + 8
        st = np.empty((cap, 8))
        m = 0.5 * (a + b)
        fa = _ext_integrand_nb(a, col, K, t0, dt, theta)
        fm = _ext_integrand_nb(m, col, K, t0, dt, theta)
        fb = _ext_integrand_nb(b, col, K, t0, dt, theta)
        st[0, 0] = a
        st[0, 1] = b
        st[0, 2] = fa
        st[0, 3] = fm
        st[0, 4] = fb
        st[0, 5] = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
        st[0, 6] = tol
        st[0, 7] = 0.0
        top = 1
        total = 0.0
        while top > 0:
            top -= 1
            a = st[top, 0]
            b = st[top, 1]
            fa = st[top, 2]
            fm = st[top, 3]
            fb = st[top, 4]
            whole = st[top, 5]
            tl = st[top, 6]
            depth = st[top, 7]
            m = 0.5 * (a + b)
            lm = 0.5 * (a + m)
            rm = 0.5 * (m + b)
            flm = _ext_integrand_nb(lm, col, K, t0, dt, theta)
            frm = _ext_integrand_nb(rm, col, K, t0, dt, theta)
            left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
            right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
            delta = left + right - whole
            if abs(delta) <= 15.0 * tl or depth >= max_depth:
                total += left + right + delta / 15.0
            else:
                st[top, 0] = m
                st[top, 1] = b
                st[top, 2] = fm
                st[top, 3] = frm
                st[top, 4] = fb
                st[top, 5] = right
                st[top, 6] = 0.5 * tl
                st[top, 7] = depth + 1.0
                top += 1
                st[top, 0] = a
                st[top, 1] = m
                st[top, 2] = fa
                st[top, 3] = flm
                st[top, 4] = fm
                st[top, 5] = left
                st[top, 6] = 0.5 * tl
                st[top, 7] = depth + 1.0
                top += 1
        return total

    @_jit
    def tilde_log_grid_nb(K, t, theta, tol):
        nt, ny = K.shape
        dt = t[1] - t[0]
        t0 = t[0]
        shrink = 1.0 - np.exp(-dt)
        out = np.empty((nt, ny))
        for j in range(ny):
            lo = t[nt - 1]
            acc = _simpson_piece(lo, lo + np.log(2.0), tol * np.exp(-lo) * shrink,
                                 j, K, t0, dt, theta, 48)
            out[nt - 1, j] = np.exp(t[nt - 1]) * acc
            for i in range(nt - 2, -1, -1):
                acc += _simpson_piece(t[i], t[i + 1], tol * np.exp(-t[i]) * shrink,
                                      j, K, t0, dt, theta, 48)
                out[i, j] = np.exp(t[i]) * acc
        return out
else:  # pragma: no cover
    tilde_log_grid_nb = None


def tilde_log_grid(K, t, theta, tol=1e-10):
    if kernels.USE_NUMBA:
        return tilde_log_grid_nb(np.ascontiguousarray(K, dtype=float),
                                 np.ascontiguousarray(t, dtype=float), float(theta), float(tol))
    return tilde_log_grid_np(np.asarray(K, dtype=float), np.asarray(t, dtype=float), theta, tol)
