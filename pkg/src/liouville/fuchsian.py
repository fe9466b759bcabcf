"""Fuchsian operators on grids and collar charts, and the profile w0.

Notation: d is the distance to the boundary, v = e^{-u} = 2d + d^2 w, and
on a collar chart T = d, D = T d/dT.  The pieces are

    L   = d^2 lap + 2 d grad d . grad - 2              (Cartesian grids)
    L0  = (D + 2)(D - 1) + T^2 d^2/dY^2                 (charts)
    L1  = 2 T d_y (D + 1) d/dY + T (lap d) D
    M_w(f) = d^2/(2 + d w) [2 f grad w . grad d + d grad w . grad f] - 2 d f lap d

Chart fields live on a grid uniform in t = ln T, where D = d/dt has
smooth coefficients all the way down to T -> 0.  The right inverse G of L0
is the chain k -> k~ (Mellin integral) -> h (mixed Poisson problem) -> w1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as sla

from .fields import CollarField, GridField
from .quadrature import adaptive_simpson_vec, lagrange_log, smooth_cutoff, tilde_log_grid


class FuchsianError(ValueError):
    pass


class PeriodError(FuchsianError):
    pass


class ContractionError(FuchsianError):
    """The fixed-point map for w0 is not contracting on this chart."""


# ---------------------------------------------------------------------------
# sampling helpers
# ---------------------------------------------------------------------------

def chart_field(chart, f, name="f", period_tol=1e-9):
    """Sample ``f(T, Y)`` on the chart; rejects functions that are not 2 theta-periodic."""
    T = chart.T[:, None]
    vals = np.asarray(f(T, chart.Y[None, :]), dtype=float) * np.ones((1, chart.Y.size))
    end = np.asarray(f(T, np.full((1, 1), chart.theta)), dtype=float) * np.ones((T.size, 1))
    scale = max(1.0, float(np.max(np.abs(vals))))
    if np.max(np.abs(end[:, 0] - vals[:, 0])) > period_tol * scale:
        raise PeriodError("field values at Y = -theta and Y = theta differ")
    with np.errstate(all="ignore"):
        tr = np.asarray(f(np.zeros((1, 1)), chart.Y[None, :]), dtype=float) * np.ones((1, chart.Y.size))
    trace = tr[0] if np.all(np.isfinite(tr)) else None
    return CollarField(chart, vals, trace, name)


def _d_t(f, dt):
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - f[:-2]) / (2 * dt)
    # third-order one-sided ends keep the boundary rows below the interior error
    out[0] = (-11 * f[0] + 18 * f[1] - 9 * f[2] + 2 * f[3]) / (6 * dt)
    out[-1] = (11 * f[-1] - 18 * f[-2] + 9 * f[-3] - 2 * f[-4]) / (6 * dt)
    return out


def _d_tt(f, dt):
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - 2 * f[1:-1] + f[:-2]) / dt ** 2
    out[0] = (35 * f[0] - 104 * f[1] + 114 * f[2] - 56 * f[3] + 11 * f[4]) / (12 * dt ** 2)
    out[-1] = (35 * f[-1] - 104 * f[-2] + 114 * f[-3] - 56 * f[-4] + 11 * f[-5]) / (12 * dt ** 2)
    return out


def _d_y(f, dy):
    return (np.roll(f, -1, axis=1) - np.roll(f, 1, axis=1)) / (2 * dy)


def _d_yy(f, dy):
    return (np.roll(f, -1, axis=1) - 2 * f + np.roll(f, 1, axis=1)) / dy ** 2


def euler_D(f: CollarField):
    """D = T d/dT, i.e. d/dt on the log grid."""
    return f.like(_d_t(f.values, f.chart.dt), None, "D" + f.name)


# ---------------------------------------------------------------------------
# chart operators
# ---------------------------------------------------------------------------

def apply_L0(f: CollarField) -> CollarField:
    c = f.chart
    F = f.values
    Df = _d_t(F, c.dt)
    out = _d_tt(F, c.dt) + Df - 2 * F + c.T[:, None] ** 2 * _d_yy(F, c.dY)
    return f.like(out, None, "L0")


def apply_L1(f: CollarField) -> CollarField:
    c = f.chart
    F = f.values
    T = c.T[:, None]
    fy = _d_y(F, c.dY)
    out = 2 * T * c.d_y * (_d_t(fy, c.dt) + fy) + T * c.lap_d * _d_t(F, c.dt)
    return f.like(out, None, "L1")


def apply_L_chart(f: CollarField) -> CollarField:
    return f.like(apply_L0(f).values + apply_L1(f).values, None, "L")


# ---------------------------------------------------------------------------
# grid operators
# ---------------------------------------------------------------------------

def _grid_derivs(values, h):
    """Central first derivatives and five-point Laplacian, NaN where incomplete."""
    f = values
    fx = np.full_like(f, np.nan)
    fy = np.full_like(f, np.nan)
    lap = np.full_like(f, np.nan)
    fx[:, 1:-1] = (f[:, 2:] - f[:, :-2]) / (2 * h)
    fy[1:-1, :] = (f[2:, :] - f[:-2, :]) / (2 * h)
    lap[1:-1, 1:-1] = (f[1:-1, 2:] + f[1:-1, :-2] + f[2:, 1:-1] + f[:-2, 1:-1]
                       - 4 * f[1:-1, 1:-1]) / h ** 2
    return fx, fy, lap


def renormalize(v: GridField, grid=None, min_distance=None) -> GridField:
    """w = (v - 2d) / d^2, masked where d < max(h, min_distance)."""
    g = grid if grid is not None else v.grid
    d = g.distance
    cut = g.h if min_distance is None else max(g.h, min_distance)
    ok = np.isfinite(v.values) & (d >= cut)
    vals = np.full_like(v.values, np.nan)
    vals[ok] = (v.values[ok] - 2 * d[ok]) / d[ok] ** 2
    return GridField(g, vals, "w")


def apply_L(f: GridField, grid=None) -> GridField:
    """d^2 lap_h f + 2 d grad d . grad_h f - 2 f with central differences."""
    g = grid if grid is not None else f.grid
    fx, fy, lap = _grid_derivs(f.values, g.h)
    d = g.distance
    out = d * d * lap + 2 * d * (g.grad_d[..., 0] * fx + g.grad_d[..., 1] * fy) - 2 * f.values
    return GridField(g, out, "Lf")


def apply_Mw(w: GridField, f: GridField, grid=None) -> GridField:
    g = grid if grid is not None else w.grid
    d = g.distance
    denom = 2.0 + d * w.values
    valid = np.isfinite(denom)
    if np.any(denom[valid] <= 0):
        raise FuchsianError("2 + d w <= 0: v is not positive")
    wx, wy, _ = _grid_derivs(w.values, g.h)
    fx, fy, _ = _grid_derivs(f.values, g.h)
    gw_gd = wx * g.grad_d[..., 0] + wy * g.grad_d[..., 1]
    gw_gf = wx * fx + wy * fy
    out = d * d / denom * (2 * f.values * gw_gd + d * gw_gf) - 2 * d * f.values * g.lap_d
    return GridField(g, out, "Mw")


def fuchsian_defect(w: GridField) -> GridField:
    """L w + 2 lap d - M_w(w): vanishes for the renormalised maximal solution."""
    g = w.grid
    Lw = apply_L(w)
    M = apply_Mw(w, w)
    return GridField(g, Lw.values + 2 * g.lap_d - M.values, "defect")


# ---------------------------------------------------------------------------
# F1 extension and the Mellin integral F2
# ---------------------------------------------------------------------------

@dataclass
class ExtendedField:
    """Extension of a chart field to T > theta.

    Even reflection about T = theta times the C^2 cutoff chi((T - theta)/theta),
    so it vanishes for T >= 2 theta (<= 2 for theta <= 1).  Y-periodic.
    """

    source: CollarField

    def __call__(self, T, col):
        c = self.source.chart
        T = np.asarray(T, dtype=float)
        th = c.theta
        inside = T <= th
        refl = (T > th) & (T < 2 * th)
        arg = np.where(inside, T, np.where(refl, 2 * th - T, th))
        val = lagrange_log(self.source.values, np.log(np.maximum(arg, 1e-300)), col, c.t[0], c.dt)
        chi = smooth_cutoff((T - th) / th)
        return np.where(inside, val, np.where(refl, chi * val, 0.0))

    def on_chart(self):
        return self.source.values.copy()

    def sample(self, T):
        T = np.asarray(T, dtype=float)
        cols = np.arange(self.source.values.shape[1])
        return np.stack([self(T, np.full(T.shape, j)) for j in cols], axis=-1)


def extend_F1(k: CollarField, period_tol=1e-9) -> ExtendedField:
    end = k.meta.get("endpoint") if k.meta else None
    if end is not None:
        end = np.asarray(end, dtype=float)
        scale = max(1.0, float(np.max(np.abs(k.values))))
        if np.max(np.abs(end - k.values[:, 0])) > period_tol * scale:
            raise PeriodError("period mismatch between Y = -theta and Y = theta")
    if not np.all(np.isfinite(k.values)):
        raise FuchsianError("extension input must be finite")
    return ExtendedField(k)


def tilde_F2(k: CollarField, tol=1e-10) -> CollarField:
    """k~(T) = integral_1^inf F1[k](T sigma) dsigma / sigma^2 at every chart node.

    In t = ln T this is e^{t} integral_t^{ln 2 theta} F1[k](e^s) e^{-s} ds,
    evaluated piecewise between consecutive nodes by adaptive Simpson and
    accumulated from the top.  The trace is that of k.
    """
    extend_F1(k)
    c = k.chart
    out = tilde_log_grid(k.values, c.t, c.theta, tol)
    if not np.all(np.isfinite(out)):
        raise FuchsianError("quadrature produced non-finite values")
    trace = k.trace if k.trace is not None else k.values[0].copy()
    return k.like(out, trace, "k~")


def tilde_truncated(kfun, T, Y, upper=2.0, tol=1e-12):
    """Mellin integral for an analytic k cut off sharply at T = ``upper``.

    Returns k~(T, Y) = T integral_T^upper k(tau, Y) tau^{-2} dtau.
    """
    T = np.atleast_1d(np.asarray(T, dtype=float))
    Y = np.broadcast_to(np.asarray(Y, dtype=float), T.shape)
    a = np.log(T)
    b = np.full_like(a, np.log(upper))

    def f(s, owner):
        return kfun(np.exp(s), Y[owner]) * np.exp(-s)

    return T * adaptive_simpson_vec(f, a, b, tol)


# ---------------------------------------------------------------------------
# h and w1
# ---------------------------------------------------------------------------

def _h_matrix(chart):
    key = ("h_lu", chart.t.size, chart.Y.size)
    if key in chart._cache:
        return chart._cache[key]
    nt, ny = chart.t.size, chart.Y.size
    dt, dY = chart.dt, chart.dY
    e2 = np.exp(2 * chart.t)
    idx = lambda i, j: i * ny + (j % ny)
    rows, cols, vals = [], [], []

    def put(r, c, v):
        rows.append(r)
        cols.append(c)
        vals.append(v)

    a_m = 1 / dt ** 2 - 1 / (2 * dt)   # coefficient of g_{i-1}
    a_p = 1 / dt ** 2 + 1 / (2 * dt)   # coefficient of g_{i+1}
    for i in range(nt):
        cy = e2[i] / dY ** 2
        for j in range(ny):
            r = idx(i, j)
            diag = -2 / dt ** 2 - 2 * cy
            put(r, idx(i, j - 1), cy)
            put(r, idx(i, j + 1), cy)
            if i == 0:
                # ghost g_{-1} = g_1 - 2 dt N0 (N0 goes to the right-hand side)
                put(r, idx(1, j), a_p + a_m)
            elif i == nt - 1:
                # Robin g + g_t = 0: ghost g_{nt} = g_{nt-2} - 2 dt g_{nt-1}
                put(r, idx(nt - 2, j), a_m + a_p)
                diag += -2 * dt * a_p
            else:
                put(r, idx(i - 1, j), a_m)
                put(r, idx(i + 1, j), a_p)
            put(r, r, diag)
    A = sparse.csc_matrix((vals, (rows, cols)), shape=(nt * ny, nt * ny))
    lu = sla.splu(A)
    chart._cache[key] = lu
    return lu


def solve_h(k_tilde: CollarField) -> CollarField:
    """Solve h_TT + h_YY + k~ = 0, h(0) = 0, h_T(theta) = 0, periodic in Y.

    Works with g = h / T, which satisfies g_tt + g_t + T^2 g_YY = -T k~ in
    t = ln T.  Bounded g gives h(0) = 0; at the bottom row the Taylor
    behaviour g_t = -T k~(0) / 2 + O(T^2) is imposed, at the top row the
    Robin condition g + g_t = 0 (i.e. h_T = 0).
    """
    c = k_tilde.chart
    K = k_tilde.values
    if not np.all(np.isfinite(K)):
        raise FuchsianError("k~ must be finite")
    nt, ny = K.shape
    dt = c.dt
    rhs = -(c.T[:, None] * K)
    N0 = -c.T[0] * K[0] / 2.0
    a_m = 1 / dt ** 2 - 1 / (2 * dt)
    rhs = rhs.copy()
    rhs[0] += a_m * 2 * dt * N0
    lu = _h_matrix(c)
    g = lu.solve(rhs.ravel()).reshape(nt, ny)
    if not np.all(np.isfinite(g)):
        raise FuchsianError("linear solve for h failed")
    out = k_tilde.like(c.T[:, None] * g, np.zeros(ny), "h")
    out.meta = {"g": g, "k_tilde": K}
    return out


def w1_from_h(h: CollarField, method="integral") -> CollarField:
    """w1 = T^{-2} (D - 1) h, with trace h_TT(0) / 2.

    ``integral``: w1 = T^{-2} integral_0^T tau h_TT(tau) dtau, with tau h_TT
    taken from the discrete equation for g = h / T, trapezoid rule in ln tau
    and the part below the first node from its T^2 behaviour.
    ``direct``: w1 = g_t / T with one-sided differences at the ends.
    """
    c = h.chart
    T = c.T[:, None]
    g = h.values / T
    if method == "direct":
        w1 = _d_t(g, c.dt) / T
        trace = w1[0].copy()
        return h.like(w1, trace, "w1")
    if method != "integral":
        raise ValueError("method must be 'integral' or 'direct'")
    K = h.meta.get("k_tilde") if h.meta else None
    if K is None:
        # tau h_TT = g_tt + g_t from differences
        q = T * (_d_tt(g, c.dt) + _d_t(g, c.dt))
    else:
        q = -(T ** 2) * K - T ** 3 * _d_yy(g, c.dY)
    acc = np.empty_like(q)
    acc[0] = 0.5 * q[0]
    acc[1:] = 0.5 * q[0] + np.cumsum(0.5 * (q[1:] + q[:-1]) * c.dt, axis=0)
    w1 = acc / T ** 2
    return h.like(w1, w1[0].copy(), "w1")


def G(k: CollarField, tol=1e-10) -> CollarField:
    """Right inverse of L0: k -> w1 with L0 w1 = k."""
    if not np.any(k.values):
        return k.like(np.zeros_like(k.values), np.zeros(k.values.shape[1]), "w1")
    return w1_from_h(solve_h(tilde_F2(k, tol)))


# ---------------------------------------------------------------------------
# w0 by contraction
# ---------------------------------------------------------------------------

@dataclass
class FixedPointReport:
    iterations: int
    differences: list
    contraction: float
    converged: bool
    theta: float
    notes: dict = field(default_factory=dict)

    def to_dict(self):
        return {"iterations": self.iterations, "differences": self.differences,
                "contraction": self.contraction, "converged": self.converged,
                "theta": self.theta, "notes": self.notes}


def w0_fixed_point(chart, tol=1e-12, max_iter=200, q_max=0.9, quad_tol=1e-12):
    """Iterate w <- G[-2 lap d - L1 w] from w = 0.

    The contraction factor is estimated from the first three iterates; a
    value >= ``q_max`` rejects the chart (shrink theta).
    Returns (w0, FixedPointReport).
    """
    base = CollarField(chart, np.zeros(chart.shape), np.zeros(chart.Y.size), "w0")
    src = -2.0 * chart.lap_d
    w = base
    diffs = []
    q = 0.0
    converged = False
    for it in range(1, max_iter + 1):
        k = src - apply_L1(w).values
        w_new = G(base.like(k, -2.0 * chart.lap_d[0]), quad_tol)
        diff = float(np.max(np.abs(w_new.values - w.values)))
        diffs.append(diff)
        w = w_new
        if it == 2 and diffs[0] > 0:
            q = diffs[1] / diffs[0]
            if q >= q_max:
                raise ContractionError(f"contraction factor {q:.3f} >= {q_max}; shrink theta")
        if diff < tol:
            converged = True
            break
    if len(diffs) >= 2 and diffs[0] > 0 and q == 0.0:
        q = diffs[1] / diffs[0]
    w.name = "w0"
    rep = FixedPointReport(it, diffs, q, converged, chart.theta,
                           {"periodized": chart.periodized, "trace_center": None})
    mid = chart.Y.size // 2
    rep.notes["trace_center"] = float(w.trace[mid]) if w.trace is not None else None
    return w, rep


def lw0_residual(w0: CollarField) -> CollarField:
    """L w0 + 2 lap d on the chart (L = L0 + L1)."""
    return w0.like(apply_L_chart(w0).values + 2 * w0.chart.lap_d, None, "Lw0+2lapd")


# ---------------------------------------------------------------------------
# sub- and super-solutions
# ---------------------------------------------------------------------------

@dataclass
class SubSuper:
    A: float
    u_plus: np.ndarray       # u_A
    u_minus: np.ndarray      # u_{-A}
    w_plus: np.ndarray
    w_minus: np.ndarray
    check_plus: np.ndarray | None = None    # L w_A + (2 + d w_A) lap d
    check_minus: np.ndarray | None = None


def sub_super(w0, A, grid=None) -> SubSuper:
    """u_{+-A} = -ln(2d + d^2 (w0 +- A d ln d)).

    ``w0`` is a CollarField (d = T; the sign diagnostics are included) or a
    GridField (d from its grid).
    """
    if isinstance(w0, CollarField):
        d = w0.chart.T[:, None] * np.ones((1, w0.chart.Y.size))
    else:
        g = grid if grid is not None else w0.grid
        d = g.distance
    W = w0.values
    with np.errstate(invalid="ignore", divide="ignore"):
        dlnd = np.where(d > 0, d * np.log(np.where(d > 0, d, 1.0)), 0.0)
    out = {}
    for sgn, key in ((1.0, "plus"), (-1.0, "minus")):
        wa = W + sgn * A * dlnd
        pos = 2.0 + d * wa
        fin = np.isfinite(pos)
        if np.any(pos[fin] <= 0):
            raise FuchsianError("2 + d w_A <= 0: A or the collar width is too large")
        out["w_" + key] = wa
        out["u_" + key] = -np.log(d * pos)
    res = SubSuper(A, out["u_plus"], out["u_minus"], out["w_plus"], out["w_minus"])
    if isinstance(w0, CollarField):
        lap = w0.chart.lap_d
        for key in ("plus", "minus"):
            wa = out["w_" + key]
            Lw = apply_L_chart(w0.like(wa)).values
            setattr(res, "check_" + key, Lw + (2.0 + d * wa) * lap)
    return res
