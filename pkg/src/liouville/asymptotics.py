"""Boundary asymptotics of computed hyperbolic radii, and refinement studies.

Probe-level checks sample fields along inward normals from boundary points:
the two-term expansion v = c1 d + c2 d^2 (+ a nuisance d^3 term), the limit
of |grad v| at the boundary, and the size of u / ln(2d) + 1.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .fields import GridField, sampler


class AnalysisError(ValueError):
    pass


@dataclass
class Probe:
    s: float
    curve: int
    point: np.ndarray
    normal: np.ndarray
    kappa: float


def make_probes(domain, probes, curve=0):
    """Boundary probes from curve parameters (or ready-made Probe objects)."""
    out = []
    for p in probes:
        if isinstance(p, Probe):
            out.append(p)
            continue
        s = float(p)
        q = np.asarray(domain.point(s, curve), dtype=float)
        r = domain.project(q[None], seed_s=[s], seed_curve=[curve], check_ambiguity=False)
        out.append(Probe(s, curve, q, r.normal[0], float(r.kappa[0])))
    return out


def default_window(domain, h):
    """(2h, min(0.1, reach/4, 0.1/kappa_max)): the upper end shrinks on curved
    boundaries, where the terms beyond d^3 become visible sooner."""
    kmax = float(domain.max_curvature())
    hi = min(0.1, float(domain.reach_estimate) / 4.0, 0.1 / kmax if kmax > 0 else np.inf)
    return (2.0 * h, hi)


def _window(domain, window, h):
    if window is None:
        if h is None:
            raise AnalysisError("a window is required for closed-form samplers")
        window = default_window(domain, h)
    lo, hi = map(float, window)
    if not 0 < lo < hi:
        raise AnalysisError("window must satisfy 0 < d_min < d_max")
    return lo, hi


def _grid_h(source):
    return source.grid.h if isinstance(source, GridField) else None


@dataclass
class ProbeFit:
    s: float
    point: list
    kappa: float
    c1: float
    c2: float
    c3: float | None
    residual: float
    alpha_fit: float | None
    n_samples: int

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class ExpansionFit:
    samples: list
    window: tuple
    method: dict = field(default_factory=dict)

    def c1(self):
        return np.array([p.c1 for p in self.samples])

    def c2(self):
        return np.array([p.c2 for p in self.samples])

    def kappa(self):
        return np.array([p.kappa for p in self.samples])

    def to_dict(self):
        return {"window": list(self.window), "method": self.method,
                "samples": [p.to_dict() for p in self.samples]}

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["s", "x", "y", "kappa", "c1", "c2", "c3", "residual", "alpha_fit"])
        for p in self.samples:
            w.writerow([repr(p.s), repr(p.point[0]), repr(p.point[1]), repr(p.kappa),
                        repr(p.c1), repr(p.c2), "" if p.c3 is None else repr(p.c3),
                        repr(p.residual), "" if p.alpha_fit is None else repr(p.alpha_fit)])
        return buf.getvalue()


def fit_expansion(v, domain, probes, window=None, n_samples=64, cubic=True, curve=0):
    """Least-squares fit of v(d) along the inward normal at each probe.

    ``v`` is a GridField (of u or of v), an oracle, or a sampler.  With
    ``cubic`` a d^3 column absorbs the next term of the expansion so c1 and
    c2 are not biased by it; without it the fit is the bare c1 d + c2 d^2.
    ``alpha_fit`` is the log-log slope of |v - 2d + kappa d^2| minus 2.
    """
    smp = sampler(v)
    lo, hi = _window(domain, window, _grid_h(v))
    ncols = 3 if cubic else 2
    if n_samples < ncols + 2:
        raise AnalysisError("insufficient samples in the fit window")
    d = np.linspace(lo, hi, n_samples)
    basis = np.stack([d ** (k + 1) for k in range(ncols)], axis=1)
    fits = []
    for pr in make_probes(domain, probes, curve):
        pts = pr.point[None, :] + d[:, None] * pr.normal[None, :]
        vals = smp.v_at(pts)
        if not np.all(np.isfinite(vals)):
            raise AnalysisError("non-finite samples in the fit window")
        coef, *_ = np.linalg.lstsq(basis, vals, rcond=None)
        res = float(np.sqrt(np.mean((basis @ coef - vals) ** 2)))
        rem = np.abs(vals - 2 * d + pr.kappa * d * d)
        ok = rem > 1e-13 * np.maximum(1.0, np.abs(vals))
        alpha = None
        if ok.sum() >= 4:
            slope = np.polyfit(np.log(d[ok]), np.log(rem[ok]), 1)[0]
            alpha = float(slope - 2.0)
        fits.append(ProbeFit(pr.s, pr.point.tolist(), pr.kappa, float(coef[0]), float(coef[1]),
                             float(coef[2]) if cubic else None, res, alpha, n_samples))
    return ExpansionFit(fits, (lo, hi), {"basis": "d, d^2" + (", d^3" if cubic else ""),
                                         "sampling": "bicubic along normals",
                                         "n_samples": n_samples})


@dataclass
class GradientLimit:
    s: float
    limit: float
    degree: int


def gradient_limit(v, domain, probes, window=None, n_samples=48, degree=2, curve=0):
    """Polynomial extrapolation of |grad v| along each normal to d = 0."""
    smp = sampler(v)
    lo, hi = _window(domain, window, _grid_h(v))
    d = np.linspace(lo, hi, n_samples)
    out = []
    for pr in make_probes(domain, probes, curve):
        pts = pr.point[None, :] + d[:, None] * pr.normal[None, :]
        g = smp.grad_at(pts)
        mag = np.hypot(g[:, 0], g[:, 1])
        coef = np.polyfit(d, mag, degree)
        out.append(GradientLimit(pr.s, float(coef[-1]), degree))
    return out


@dataclass
class LogRatio:
    s: float
    sup: float
    argmax_d: float


def log_ratio_check(u, domain, probes, window=(0.01, 0.2), n_samples=64, curve=0):
    """sup over the window of |u / ln(2d) + 1| / d along each normal.

    The window must keep 2d <= 0.4 so that ln(2d) stays away from 0.
    """
    lo, hi = map(float, window)
    if hi > 0.2 + 1e-12:
        raise AnalysisError("log-ratio window must keep 2d <= 0.4")
    if not 0 < lo < hi:
        raise AnalysisError("window must satisfy 0 < d_min < d_max")
    smp = sampler(u)
    d = np.linspace(lo, hi, n_samples)
    out = []
    for pr in make_probes(domain, probes, curve):
        pts = pr.point[None, :] + d[:, None] * pr.normal[None, :]
        uu = smp.u_at(pts)
        r = np.abs(uu / np.log(2 * d) + 1.0) / d
        k = int(np.argmax(r))
        out.append(LogRatio(pr.s, float(r[k]), float(d[k])))
    return out


def disk_log_ratio_bound(r0, window, n=20001):
    """Closed-form sup of |u/ln(2d) + 1| / d for the disk of radius r0 on a window."""
    d = np.linspace(window[0], window[1], n)
    u = -np.log(2 * d - d * d / r0)
    return float(np.max(np.abs(u / np.log(2 * d) + 1) / d))


def radius_identity_residual(v: GridField, min_distance_factor=10.0):
    """v lap_h v - |grad_h v|^2 + 4 at nodes with d > factor * h (NaN elsewhere)."""
    g = v.grid
    f = v.values
    h = g.h
    fx = np.full_like(f, np.nan)
    fy = np.full_like(f, np.nan)
    lap = np.full_like(f, np.nan)
    fx[:, 1:-1] = (f[:, 2:] - f[:, :-2]) / (2 * h)
    fy[1:-1, :] = (f[2:, :] - f[:-2, :]) / (2 * h)
    lap[1:-1, 1:-1] = (f[1:-1, 2:] + f[1:-1, :-2] + f[2:, 1:-1] + f[:-2, 1:-1]
                       - 4 * f[1:-1, 1:-1]) / h ** 2
    res = f * lap - fx ** 2 - fy ** 2 + 4.0
    res[g.distance <= min_distance_factor * h] = np.nan
    return GridField(g, res, "identity")


# ---------------------------------------------------------------------------
# refinement studies
# ---------------------------------------------------------------------------

@dataclass
class ConvergenceTable:
    hs: list
    errors: list
    orders: list
    extras: list = field(default_factory=list)

    @property
    def min_order(self):
        return float(min(self.orders)) if self.orders else float("nan")

    @property
    def fitted_order(self):
        return float(np.polyfit(np.log(self.hs), np.log(self.errors), 1)[0])

    def to_dict(self):
        return {"h": self.hs, "error": self.errors, "order": self.orders,
                "min_order": self.min_order, "fitted_order": self.fitted_order}

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["h", "error", "order"])
        for i, (h, e) in enumerate(zip(self.hs, self.errors)):
            w.writerow([repr(h), repr(e), "" if i == 0 else repr(self.orders[i - 1])])
        return buf.getvalue()


def observed_orders(hs, errors):
    hs = np.asarray(hs, dtype=float)
    e = np.asarray(errors, dtype=float)
    return [float(np.log(e[i] / e[i + 1]) / np.log(hs[i] / hs[i + 1])) for i in range(len(e) - 1)]


def convergence_study(task, hs):
    """Run ``task(h) -> error`` (or ``(error, extra)``) over decreasing h; report orders."""
    hs = [float(h) for h in hs]
    if len(hs) < 3:
        raise AnalysisError("a convergence study needs at least three grids")
    errors, extras = [], []
    for h in hs:
        r = task(h)
        if isinstance(r, tuple):
            errors.append(float(r[0]))
            extras.append(r[1])
        else:
            errors.append(float(r))
    return ConvergenceTable(hs, errors, observed_orders(hs, errors), extras)


# ---------------------------------------------------------------------------
# solver fields on collar charts
# ---------------------------------------------------------------------------

def collar_w(u, chart):
    """w = (v - 2T) / T^2 at the chart nodes, v interpolated from a grid field."""
    from .fields import CollarField

    v = sampler(u).v_at(chart.world)
    T = chart.T[:, None]
    return CollarField(chart, (v - 2.0 * T) / T ** 2, None, "w")


def _collar_region(chart, t_min, t_max):
    T = chart.T[:, None] * np.ones((1, chart.Y.size))
    return (T >= t_min) & (T <= t_max) & chart.valid_y[None, :]


@dataclass
class Envelope:
    A_needed: float
    witness_T: float
    n_nodes: int
    t_range: tuple

    def admits(self, A):
        return self.A_needed <= A


def envelope_constant(w, w0, t_min, t_max=None):
    """Smallest A with |w - w0| <= A T ln(1/T) on chart nodes with t_min <= T <= t_max.

    This is the same as u_{-A} <= u <= u_A at those nodes.  ``t_max`` defaults
    to min(theta, 0.2) so that ln(1/T) stays bounded away from zero.
    """
    c = w0.chart
    t_max = min(c.theta, 0.2) if t_max is None else t_max
    m = _collar_region(c, t_min, t_max)
    if not m.any():
        raise AnalysisError("no chart nodes in the envelope window")
    T = c.T[:, None] * np.ones((1, c.Y.size))
    ratio = np.abs(w.values - w0.values)[m] / (T * np.log(1.0 / T))[m]
    k = int(np.argmax(ratio))
    return Envelope(float(ratio[k]), float(T[m][k]), int(m.sum()), (t_min, t_max))


def regularity_profile(w, w0, t_min, t_max, alpha=0.5, seed=0):
    """Sup norms and Hoelder seminorms used to watch for blow-up under refinement.

    All quantities are taken over chart nodes with t_min <= T <= t_max in the
    valid part of the chart: sup |w|, sup |T^2 grad w|, and the alpha-seminorms
    of T w, T^2 grad w and T^2 grad^2 (w - w0).
    """
    from .holder import holder_seminorm, weighted_derivatives, _chart_points

    c = w.chart
    m = _collar_region(c, t_min, t_max)
    T = (c.T[:, None] * np.ones((1, c.Y.size))).ravel()
    pts = _chart_points(c)
    d1 = weighted_derivatives(w, 1) * T[:, None]          # T^2 grad w
    d2 = weighted_derivatives(w.like(w.values - w0.values), 2)
    mf = m.ravel()
    return {
        "sup_w": float(np.max(np.abs(w.values[m]))),
        "sup_d2_grad_w": float(np.max(np.abs(d1[mf]))),
        "holder_dw": holder_seminorm((pts, T * w.values.ravel()), alpha, region=mf,
                                     seed=seed).seminorm,
        "holder_d2_grad_w": holder_seminorm((pts, d1), alpha, region=mf, seed=seed).seminorm,
        "holder_T2_hess_rem": holder_seminorm((pts, d2), alpha, region=mf, seed=seed).seminorm,
    }


def relative_drift(values):
    """max over consecutive pairs of |a - b| / max(|a|, |b|)."""
    v = [float(x) for x in values]
    out = 0.0
    for a, b in zip(v, v[1:]):
        s = max(abs(a), abs(b))
        if s > 0:
            out = max(out, abs(a - b) / s)
    return out
