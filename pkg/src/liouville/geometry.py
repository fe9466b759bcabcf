"""Smooth planar domains: boundary curves, curvature, signed distance, grids
and boundary-fitted collar charts.

All curves are parametrised on s in [0, 1) and stored with the domain on
their left, so outer boundaries run counterclockwise and holes clockwise.
With that convention the signed curvature is positive where the boundary is
convex as seen from inside, and the distance function satisfies
``lap d = -kappa / (1 - d kappa)`` with kappa taken at the foot point.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.spatial import cKDTree

N_SAMPLES = 1024
_TWO_PI = 2.0 * np.pi


class GeometryError(ValueError):
    """Invalid geometric input or a chart/grid request the domain cannot honour."""


# ---------------------------------------------------------------------------
# curves
# ---------------------------------------------------------------------------

class FourierCurve:
    """Closed curve with truncated Fourier coordinates.

    ``x(s) = x_cos[0] + sum_k x_cos[k] cos(2 pi k s) + x_sin[k] sin(2 pi k s)``
    and likewise for y; ``x_sin[0]`` and ``y_sin[0]`` are ignored.
    """

    def __init__(self, x_cos, x_sin, y_cos, y_sin):
        n = max(len(x_cos), len(x_sin), len(y_cos), len(y_sin))
        pad = lambda c: np.pad(np.asarray(c, dtype=float), (0, n - len(c)))
        self.x_cos, self.x_sin = pad(x_cos), pad(x_sin)
        self.y_cos, self.y_sin = pad(y_cos), pad(y_sin)
        self.x_sin[0] = self.y_sin[0] = 0.0
        self._w = _TWO_PI * np.arange(n)

    def eval(self, s, der=0):
        s = np.asarray(s, dtype=float)
        ph = np.multiply.outer(s, self._w)
        c, sn = np.cos(ph), np.sin(ph)
        w = self._w
        if der == 0:
            bc, bs = c, sn
        elif der == 1:
            bc, bs = -sn * w, c * w
        elif der == 2:
            bc, bs = -c * w ** 2, -sn * w ** 2
        else:
            raise ValueError("derivative order must be 0, 1 or 2")
        x = bc @ self.x_cos + bs @ self.x_sin
        y = bc @ self.y_cos + bs @ self.y_sin
        return np.stack([x, y], axis=-1)

    def reversed(self):
        return FourierCurve(self.x_cos, -self.x_sin, self.y_cos, -self.y_sin)

    def describe(self):
        return {"x_cos": self.x_cos.tolist(), "x_sin": self.x_sin.tolist(),
                "y_cos": self.y_cos.tolist(), "y_sin": self.y_sin.tolist()}


class SplineCurve:
    """Periodic cubic spline through control points, chord-length parametrised."""

    def __init__(self, points):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 4:
            raise GeometryError("spline needs at least 4 control points of shape (n, 2)")
        if np.allclose(pts[0], pts[-1]):
            pts = pts[:-1]
        self.points = pts
        closed = np.vstack([pts, pts[:1]])
        seg = np.linalg.norm(np.diff(closed, axis=0), axis=1)
        if np.any(seg <= 0):
            raise GeometryError("repeated consecutive control points")
        u = np.concatenate([[0.0], np.cumsum(seg)])
        u /= u[-1]
        self._cs = CubicSpline(u, closed, bc_type="periodic", axis=0)

    def eval(self, s, der=0):
        s = np.mod(np.asarray(s, dtype=float), 1.0)
        return self._cs(s, der)

    def reversed(self):
        return SplineCurve(self.points[::-1])

    def describe(self):
        return {"points": self.points.tolist()}


def _signed_area(curve, n=N_SAMPLES):
    p = curve.eval(np.arange(n) / n)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)


def _curvature_of(curve, s):
    d1 = curve.eval(s, 1)
    d2 = curve.eval(s, 2)
    speed = np.hypot(d1[..., 0], d1[..., 1])
    cross = d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0]
    return cross / speed ** 3, speed


# ---------------------------------------------------------------------------
# domains
# ---------------------------------------------------------------------------

@dataclass
class DistanceResult:
    d: np.ndarray            # signed distance, > 0 inside
    foot: np.ndarray         # nearest boundary point, (..., 2)
    s: np.ndarray            # curve parameter of the foot
    curve: np.ndarray        # index of the curve carrying the foot
    normal: np.ndarray       # inward unit normal at the foot (= grad d)
    kappa: np.ndarray        # signed curvature at the foot
    ambiguous: np.ndarray    # several nearest points and beyond reach
    stationarity: np.ndarray  # |(p - q) . gamma'| / |gamma'|


class Domain2D:
    """Bounded domain whose boundary is one or more closed C^2 curves."""

    def __init__(self, curves, kind="fourier", params=None, reach=None,
                 counterclockwise=True):
        self.kind = kind
        self.params = dict(params or {})
        self.counterclockwise = counterclockwise
        self.curves = list(curves)
        if not self.curves:
            raise GeometryError("domain needs at least one boundary curve")
        s = np.arange(N_SAMPLES) / N_SAMPLES
        for c in self.curves:
            _, speed = _curvature_of(c, s)
            if np.min(speed) <= 1e-10:
                raise GeometryError("boundary curve is not regular (vanishing tangent)")
            p0, p1 = c.eval(0.0), c.eval(1.0 - 1e-12)
            if np.linalg.norm(p0 - p1) > 1e-6:
                raise GeometryError("boundary curve is not closed")
        self._samples = [c.eval(s) for c in self.curves]
        pts = np.concatenate(self._samples)
        self._tree = cKDTree(pts)
        self._sample_curve = np.repeat(np.arange(len(self.curves)), N_SAMPLES)
        self._sample_s = np.tile(s, len(self.curves))
        self.reach_estimate = float(reach) if reach is not None else self._estimate_reach()
        if not self.reach_estimate > 0:
            raise GeometryError("reach estimate must be positive")

    # -- basic queries ------------------------------------------------------

    @property
    def bounds(self):
        pts = np.concatenate(self._samples)
        return pts[:, 0].min(), pts[:, 0].max(), pts[:, 1].min(), pts[:, 1].max()

    def point(self, s, curve=0):
        return self.curves[curve].eval(s)

    def curvature(self, s, curve=0):
        return curvature(self, s, curve)

    def max_curvature(self):
        s = np.arange(N_SAMPLES) / N_SAMPLES
        return max(np.max(np.abs(_curvature_of(c, s)[0])) for c in self.curves)

    def describe(self):
        return {"kind": self.kind, "params": self.params,
                "reach": self.reach_estimate}

    def digest(self):
        blob = json.dumps(self.describe(), sort_keys=True, default=float)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    # -- reach ---------------------------------------------------------------

    def _estimate_reach(self, n=512):
        s = np.arange(n) / n
        kmax = 0.0
        pts, tans, cid, par = [], [], [], []
        for ic, c in enumerate(self.curves):
            k, _ = _curvature_of(c, np.arange(N_SAMPLES) / N_SAMPLES)
            kmax = max(kmax, np.max(np.abs(k)))
            d1 = c.eval(s, 1)
            pts.append(c.eval(s))
            tans.append(d1 / np.linalg.norm(d1, axis=1, keepdims=True))
            cid.append(np.full(n, ic))
            par.append(s)
        P, Tn = np.concatenate(pts), np.concatenate(tans)
        C, S = np.concatenate(cid), np.concatenate(par)
        chord = P[None, :, :] - P[:, None, :]
        length = np.linalg.norm(chord, axis=2)
        with np.errstate(invalid="ignore", divide="ignore"):
            ci = np.abs(np.einsum("ijk,ik->ij", chord, Tn)) / length
            cj = np.abs(np.einsum("ijk,jk->ij", chord, Tn)) / length
        ds = np.abs(S[:, None] - S[None, :])
        ds = np.minimum(ds, 1.0 - ds)
        far = (C[:, None] != C[None, :]) | (ds > 0.05)
        ok = far & (ci < 0.05) & (cj < 0.05) & (length > 0)
        bottleneck = np.min(length[ok]) if ok.any() else np.inf
        curv_bound = 1.0 / kmax if kmax > 0 else np.inf
        return float(min(curv_bound, 0.5 * bottleneck))

    # -- projection ----------------------------------------------------------

    def _refine(self, p, s, curve_idx, iters=60):
        s = s.copy()
        for ic in np.unique(curve_idx):
            sel = curve_idx == ic
            c = self.curves[ic]
            ss, pp = s[sel], p[sel]
            active = np.ones(ss.shape, dtype=bool)
            for _ in range(iters):
                if not active.any():
                    break
                sa = ss[active]
                g0 = c.eval(sa)
                g1 = c.eval(sa, 1)
                g2 = c.eval(sa, 2)
                diff = g0 - pp[active]
                f = np.sum(diff * g1, axis=1)
                n1 = np.sum(g1 * g1, axis=1)
                fp = n1 + np.sum(diff * g2, axis=1)
                fp = np.where(fp > 1e-6 * n1, fp, n1)   # Newton while the second variation is positive
                step = np.clip(f / fp, -0.5 / N_SAMPLES, 0.5 / N_SAMPLES)
                ss[active] = sa - step
                still = np.abs(step) > 1e-15
                idx = np.flatnonzero(active)
                active[idx[~still]] = False
            s[sel] = np.mod(ss, 1.0)
        return s

    def project(self, points, seed_s=None, seed_curve=None, check_ambiguity=True):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        shape = p.shape[:-1]
        p = p.reshape(-1, 2)
        if seed_s is None:
            _, idx = self._tree.query(p)
            s0 = self._sample_s[idx]
            cidx = self._sample_curve[idx]
        else:
            s0 = np.broadcast_to(np.asarray(seed_s, dtype=float).reshape(-1),
                                 (p.shape[0],)).copy()
            sc = np.asarray(seed_curve if seed_curve is not None else 0).reshape(-1)
            cidx = np.broadcast_to(sc, (p.shape[0],)).astype(int)
        s = self._refine(p, s0, cidx)
        foot = np.empty_like(p)
        g1 = np.empty_like(p)
        kappa = np.empty(p.shape[0])
        for ic in np.unique(cidx):
            sel = cidx == ic
            c = self.curves[ic]
            foot[sel] = c.eval(s[sel])
            g1[sel] = c.eval(s[sel], 1)
            kappa[sel] = _curvature_of(c, s[sel])[0]
        speed = np.linalg.norm(g1, axis=1)
        tan = g1 / speed[:, None]
        normal = np.stack([-tan[:, 1], tan[:, 0]], axis=1)
        diff = p - foot
        dist = np.linalg.norm(diff, axis=1)
        sign = np.sign(np.sum(diff * normal, axis=1))
        d = sign * dist
        stat = np.abs(np.sum(diff * tan, axis=1))
        ambiguous = np.zeros(p.shape[0], dtype=bool)
        if check_ambiguity:
            deep = np.flatnonzero(dist >= self.reach_estimate * (1 - 1e-9))
            if deep.size:
                ambiguous[deep] = self._ambiguous(p[deep], dist[deep])
        reshape = lambda a, extra=(): a.reshape(shape + extra)
        return DistanceResult(reshape(d), reshape(foot, (2,)), reshape(s), reshape(cidx),
                              reshape(normal, (2,)), reshape(kappa), reshape(ambiguous),
                              reshape(stat))

    def _ambiguous(self, p, dist):
        out = np.zeros(p.shape[0], dtype=bool)
        allpts = np.concatenate(self._samples)
        spacing = 1.0 / N_SAMPLES
        for k in range(p.shape[0]):
            dd = np.linalg.norm(allpts - p[k], axis=1)
            near = np.flatnonzero(dd <= dd.min() * (1 + 1e-6) + 1e-9)
            cs = self._sample_curve[near]
            ss = self._sample_s[near]
            if np.unique(cs).size > 1:
                out[k] = True
                continue
            ref = ss[np.argmin(dd[near])]
            gap = np.abs(ss - ref)
            gap = np.minimum(gap, 1 - gap)
            out[k] = bool(np.max(gap) > 4 * spacing)
        return out

    def signed_distance(self, points, **kw):
        return signed_distance(self, points, **kw)


class HalfPlane:
    """The half-plane {x > 0}; boundary is the y-axis, flat (kappa = 0).

    Only useful together with a bounding box for grids; serves as the flat
    model case.
    """

    kind = "halfplane"

    def __init__(self, box=(0.0, 1.0, 0.0, 1.0)):
        self.box = tuple(float(b) for b in box)
        self.params = {"box": list(self.box)}
        self.reach_estimate = np.inf
        self.counterclockwise = True
        self.curves = []

    @property
    def bounds(self):
        return self.box

    def point(self, s, curve=0):
        s = np.asarray(s, dtype=float)
        return np.stack([np.zeros_like(s), s], axis=-1)

    def curvature(self, s, curve=0):
        return np.zeros_like(np.asarray(s, dtype=float))

    def max_curvature(self):
        return 0.0

    def describe(self):
        return {"kind": "halfplane", "params": self.params, "reach": "inf"}

    def digest(self):
        blob = json.dumps(self.describe(), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def project(self, points, seed_s=None, seed_curve=None, check_ambiguity=True):
        p = np.asarray(points, dtype=float)
        shape = p.shape[:-1]
        d = p[..., 0].copy()
        foot = np.stack([np.zeros_like(d), p[..., 1]], axis=-1)
        normal = np.zeros(shape + (2,))
        normal[..., 0] = 1.0
        z = np.zeros(shape)
        return DistanceResult(d, foot, p[..., 1].copy(), np.zeros(shape, dtype=int),
                              normal, z, np.zeros(shape, dtype=bool), z.copy())

    def signed_distance(self, points, **kw):
        return self.project(points)


# -- constructors -------------------------------------------------------------

def _oriented(curve, want_ccw):
    if (_signed_area(curve) > 0) != want_ccw:
        return curve.reversed(), False
    return curve, True


def circle(center=(0.0, 0.0), radius=1.0):
    if radius <= 0:
        raise GeometryError("radius must be positive")
    cx, cy = center
    c = FourierCurve([cx, radius], [0, 0], [cy, 0], [0, radius])
    return Domain2D([c], "circle", {"center": list(map(float, center)), "radius": float(radius)})


def ellipse(center=(0.0, 0.0), semi_axes=(2.0, 1.0), rotation=0.0):
    a, b = semi_axes
    if a <= 0 or b <= 0:
        raise GeometryError("semi-axes must be positive")
    cr, sr = np.cos(rotation), np.sin(rotation)
    cx, cy = center
    c = FourierCurve([cx, a * cr], [0, -b * sr], [cy, a * sr], [0, b * cr])
    return Domain2D([c], "ellipse", {"center": list(map(float, center)),
                                     "semi_axes": [float(a), float(b)],
                                     "rotation": float(rotation)})


def annulus(center=(0.0, 0.0), r0=0.5):
    """B_{1/r0} minus closed B_{r0}, the comparison domain for exterior balls."""
    if not 0 < r0 < 1:
        raise GeometryError("annulus needs 0 < r0 < 1")
    cx, cy = center
    R = 1.0 / r0
    outer = FourierCurve([cx, R], [0, 0], [cy, 0], [0, R])
    inner = FourierCurve([cx, r0], [0, 0], [cy, 0], [0, -r0])  # clockwise
    return Domain2D([outer, inner], "annulus",
                    {"center": list(map(float, center)), "r0": float(r0)})


def fourier_domain(x_cos, x_sin, y_cos, y_sin, reach=None):
    c = FourierCurve(x_cos, x_sin, y_cos, y_sin)
    c, ccw = _oriented(c, True)
    params = {"x_cos": list(map(float, x_cos)), "x_sin": list(map(float, x_sin)),
              "y_cos": list(map(float, y_cos)), "y_sin": list(map(float, y_sin))}
    return Domain2D([c], "fourier", params, reach=reach, counterclockwise=ccw)


def spline_domain(points, reach=None):
    c = SplineCurve(points)
    c, ccw = _oriented(c, True)
    return Domain2D([c], "spline", {"points": np.asarray(points, float).tolist()},
                    reach=reach, counterclockwise=ccw)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def curvature(domain, s, curve=0):
    """Signed curvature of boundary curve ``curve`` at parameter ``s``."""
    if isinstance(domain, HalfPlane):
        return domain.curvature(s)
    k, speed = _curvature_of(domain.curves[curve], np.asarray(s, dtype=float))
    if np.any(speed < 1e-10):
        raise GeometryError("degenerate tangent: curvature undefined")
    return k


def signed_distance(domain, points, seed_s=None, seed_curve=None, check_ambiguity=True):
    """Signed distance with nearest boundary point (positive inside).

    Seeds come from a k-d tree over 1024 samples per curve unless given; the
    projection is refined by damped Newton on ``(p - q) . gamma'(s) = 0``.
    """
    return domain.project(points, seed_s=seed_s, seed_curve=seed_curve,
                          check_ambiguity=check_ambiguity)


# directions E, W, N, S as (di, dj) over (x, y)
DIRECTIONS = ((1, 0), (-1, 0), (0, 1), (0, -1))


@dataclass
class Grid:
    """Cartesian node set over a domain, with Shortley-Weller cut data.

    Node arrays have shape ``(ny, nx)`` (row = y).  ``theta[m]`` holds the arm
    fraction towards direction ``DIRECTIONS[m]``: 1 where the neighbour is an
    interior node, the cut fraction in (0, 1] otherwise.  ``cuts`` lists every
    cut arm with its crossing point and the geometry there.
    """

    domain: object
    origin: tuple
    h: float
    nx: int
    ny: int
    trim: float
    box: tuple | None
    X: np.ndarray
    Y: np.ndarray
    distance: np.ndarray
    grad_d: np.ndarray
    kappa_foot: np.ndarray
    foot_s: np.ndarray
    foot_curve: np.ndarray
    interior: np.ndarray
    index: np.ndarray
    theta: np.ndarray
    cuts: dict = field(repr=False)

    @property
    def n_interior(self):
        return int(self.interior.sum())

    @property
    def lap_d(self):
        k = self.kappa_foot
        return -k / (1.0 - self.distance * k)

    def points(self):
        return np.stack([self.X, self.Y], axis=-1)

    def interior_points(self):
        return self.points()[self.interior]

    def header(self):
        return {"nx": self.nx, "ny": self.ny, "origin": list(self.origin),
                "spacing": self.h, "trim": self.trim,
                "domain_hash": self.domain.digest()}


def _box_fraction(x, y, di, dj, h, box):
    """Fraction of the arm from (x, y) in direction (di, dj) before a box wall."""
    if box is None:
        return np.full(np.shape(x), np.inf)
    x0, x1, y0, y1 = box
    if di == 1:
        return (x1 - x) / h
    if di == -1:
        return (x - x0) / h
    if dj == 1:
        return (y1 - y) / h
    return (y - y0) / h


def build_grid(domain, h, trim=0.0, box=None, margin=3):
    """Cartesian grid with interior mask ``d > trim`` and cut-cell data.

    Node coordinates are integer multiples of ``h`` so grids of different
    spacing share nodes.  For the half-plane a ``box`` is mandatory; box walls
    are extra Dirichlet boundaries.
    """
    if not h > 0:
        raise GeometryError("grid spacing must be positive")
    if trim < 0:
        raise GeometryError("trim must be >= 0")
    if box is None and isinstance(domain, HalfPlane):
        box = domain.box
    if box is not None:
        xmin, xmax, ymin, ymax = box
    else:
        xmin, xmax, ymin, ymax = domain.bounds
    i0 = int(np.floor(xmin / h)) - (0 if box is not None else margin)
    i1 = int(np.ceil(xmax / h)) + (0 if box is not None else margin)
    j0 = int(np.floor(ymin / h)) - (0 if box is not None else margin)
    j1 = int(np.ceil(ymax / h)) + (0 if box is not None else margin)
    xs = np.arange(i0, i1 + 1) * h
    ys = np.arange(j0, j1 + 1) * h
    X, Y = np.meshgrid(xs, ys)
    ny, nx = X.shape
    res = domain.project(np.stack([X, Y], axis=-1), check_ambiguity=False)
    d = res.d
    interior = d > trim
    if box is not None:
        bx0, bx1, by0, by1 = box
        interior &= (X > bx0) & (X < bx1) & (Y > by0) & (Y < by1)
    if not interior.any():
        raise GeometryError("grid too coarse: no interior node")
    index = np.full((ny, nx), -1, dtype=np.int64)
    index[interior] = np.arange(int(interior.sum()))
    theta = np.ones((4, ny, nx))

    recs = {k: [] for k in ("node", "dir", "theta", "point", "d", "kappa", "normal", "s", "curve")}
    jj, ii = np.nonzero(interior)
    for m, (di, dj) in enumerate(DIRECTIONS):
        nj, ni = jj + dj, ii + di
        inside_arr = (ni >= 0) & (ni < nx) & (nj >= 0) & (nj < ny)
        nb_int = np.zeros(jj.shape, dtype=bool)
        nb_int[inside_arr] = interior[nj[inside_arr], ni[inside_arr]]
        cut = ~nb_int
        if not cut.any():
            continue
        cj, ci = jj[cut], ii[cut]
        px, py = X[cj, ci], Y[cj, ci]
        tb = _box_fraction(px, py, di, dj, h, box)
        # level-set crossing for neighbours failing d > trim
        nbd = np.full(cj.shape, -np.inf)
        ok = inside_arr[cut]
        nbd[ok] = d[nj[cut][ok], ni[cut][ok]]
        if not ok.all():
            q = np.stack([px[~ok] + di * h, py[~ok] + dj * h], axis=-1)
            nbd[~ok] = domain.project(q, check_ambiguity=False).d
        needs = nbd <= trim
        tl = np.full(cj.shape, np.inf)
        if needs.any():
            tl[needs] = _level_crossing(domain, px[needs], py[needs], di, dj, h, trim,
                                        d[cj[needs], ci[needs]], nbd[needs],
                                        res.s[cj[needs], ci[needs]],
                                        res.curve[cj[needs], ci[needs]])
        t = np.minimum(tb, tl)
        t = np.clip(t, 1e-12, 1.0)
        theta[m, cj, ci] = t
        cp = np.stack([px + t * di * h, py + t * dj * h], axis=-1)
        cr = domain.project(cp, seed_s=res.s[cj, ci], seed_curve=res.curve[cj, ci],
                            check_ambiguity=False)
        recs["node"].append(index[cj, ci])
        recs["dir"].append(np.full(cj.shape, m))
        recs["theta"].append(t)
        recs["point"].append(cp)
        recs["d"].append(cr.d)
        recs["kappa"].append(cr.kappa)
        recs["normal"].append(cr.normal)
        recs["s"].append(cr.s)
        recs["curve"].append(cr.curve)
    cuts = {}
    for k, v in recs.items():
        if v:
            cuts[k] = np.concatenate(v)
        else:
            cuts[k] = np.zeros((0, 2)) if k in ("point", "normal") else np.zeros(0)
    cuts["node"] = cuts["node"].astype(np.int64)
    cuts["dir"] = cuts["dir"].astype(np.int64)
    return Grid(domain=domain, origin=(float(xs[0]), float(ys[0])), h=float(h), nx=nx,
                ny=ny, trim=float(trim), box=box, X=X, Y=Y, distance=d, grad_d=res.normal,
                kappa_foot=res.kappa, foot_s=res.s, foot_curve=res.curve,
                interior=interior, index=index, theta=theta, cuts=cuts)


def _level_crossing(domain, px, py, di, dj, h, level, d0, d1, seed_s, seed_c, iters=40):
    """Safeguarded Newton for t in (0, 1] with d(p + t h e) = level."""
    lo = np.zeros_like(px)
    hi = np.ones_like(px)
    denom = d0 - d1
    t = np.where(np.isfinite(d1) & (denom > 0), (d0 - level) / np.where(denom > 0, denom, 1), 0.5)
    t = np.clip(t, 1e-6, 1.0)
    for _ in range(iters):
        q = np.stack([px + t * di * h, py + t * dj * h], axis=-1)
        r = domain.project(q, seed_s=seed_s, seed_curve=seed_c, check_ambiguity=False)
        f = r.d - level
        lo = np.where(f > 0, t, lo)
        hi = np.where(f <= 0, t, hi)
        fp = h * (r.normal[:, 0] * di + r.normal[:, 1] * dj)
        with np.errstate(divide="ignore", invalid="ignore"):
            tn = t - f / fp
        bad = ~np.isfinite(tn) | (tn <= lo) | (tn >= hi) | (fp >= 0)
        tn = np.where(bad, 0.5 * (lo + hi), tn)
        if np.max(np.abs(tn - t)) < 1e-15:
            t = tn
            break
        t = tn
    return t


# ---------------------------------------------------------------------------
# collar charts
# ---------------------------------------------------------------------------

@dataclass
class CollarChart:
    """Boundary-fitted chart (T, Y) -> (x, y) around a boundary point.

    ``T`` is the distance to the boundary and ``Y`` the coordinate along the
    tangent after the rigid motion that puts the base point at the origin
    with ``grad d = (1, 0)``.  Coefficient fields live on a grid that is
    uniform in ``t = ln T`` (rows) and in ``Y`` (columns, periodic with period
    2 theta).  If the raw coefficients are not 2 theta-periodic they are
    blended to their Y = 0 profile near |Y| = theta; the chart is then exact
    on ``|Y| <= theta/2`` only (``valid_y``).
    """

    domain: object
    base_point: np.ndarray
    s_base: float
    curve: int
    kappa_base: float
    theta: float
    rotation: np.ndarray     # rows e1 (inward normal), e2 (tangent axis)
    t: np.ndarray
    Y: np.ndarray
    depth: float
    world: np.ndarray        # (nt, ny, 2)
    d_y: np.ndarray
    lap_d: np.ndarray
    jacobian: np.ndarray     # d_x on the chart
    periodized: bool
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def T(self):
        return np.exp(self.t)

    @property
    def dt(self):
        return float(self.t[1] - self.t[0])

    @property
    def dY(self):
        return float(self.Y[1] - self.Y[0])

    @property
    def shape(self):
        return (self.t.size, self.Y.size)

    @property
    def valid_y(self):
        if self.periodized:
            return np.abs(self.Y) <= 0.5 * self.theta + 1e-12
        return np.ones(self.Y.size, dtype=bool)

    def to_world(self, T, Y):
        return _chart_solve(self.domain, self.base_point, self.rotation, np.asarray(T, float),
                            np.asarray(Y, float), self.s_base, None)[0]

    def to_chart(self, points):
        p = np.asarray(points, dtype=float)
        r = self.domain.project(p, check_ambiguity=False)
        return r.d, (p - self.base_point) @ self.rotation[1]

    def refined(self):
        return collar_chart(self.domain, self.s_base, self.theta, n_y=2 * self.Y.size,
                            depth=self.depth, curve=self.curve)

    def header(self):
        return {"base_point": self.base_point.tolist(), "theta": self.theta,
                "rotation": self.rotation.tolist(), "t_min": float(self.t[0]),
                "dt": self.dt, "nt": int(self.t.size), "ny": int(self.Y.size),
                "s_base": self.s_base, "curve": self.curve}


def _chart_solve(domain, P, R, T, Y, s_seed, curve, iters=40):
    """World points with d = T on the line P + x e1 + Y e2 (Newton in x)."""
    e1, e2 = R[0], R[1]
    x = T.copy()
    for _ in range(iters):
        w = P + x[..., None] * e1 + Y[..., None] * e2
        r = domain.project(w, seed_s=np.full(T.shape, s_seed) if curve is not None else None,
                           seed_curve=np.full(T.shape, curve) if curve is not None else None,
                           check_ambiguity=False)
        f = r.d - T
        dx = r.normal @ e1
        if np.any(dx <= 0.05):
            raise GeometryError("collar chart Jacobian degenerates; shrink theta")
        step = f / dx
        x = x - step
        if np.max(np.abs(step)) < 1e-15:
            break
    w = P + x[..., None] * e1 + Y[..., None] * e2
    r = domain.project(w, seed_s=np.full(T.shape, s_seed) if curve is not None else None,
                       seed_curve=np.full(T.shape, curve) if curve is not None else None,
                       check_ambiguity=False)
    return w, r


def collar_chart(domain, base, theta, n_y=32, depth=12.0, curve=0):
    """Collar chart over (0, theta] x [-theta, theta) at a boundary point.

    ``base`` is a curve parameter (or, for the half-plane, the y coordinate).
    The log-T grid has spacing ``2 / n_y`` so that near T = theta one step in
    T matches one step in Y, and reaches down to ``T = theta * exp(-depth)``.
    """
    if n_y < 8 or n_y % 2:
        raise GeometryError("n_y must be an even number >= 8")
    if not 0 < theta < domain.reach_estimate:
        raise GeometryError("theta must lie in (0, reach)")
    s_base = float(base)
    P = np.asarray(domain.point(s_base, curve), dtype=float)
    pr = domain.project(P[None], seed_s=[s_base], seed_curve=[curve], check_ambiguity=False)
    e1 = pr.normal[0]
    e2 = np.array([-e1[1], e1[0]])
    R = np.stack([e1, e2])
    dt = 2.0 / n_y
    nt = int(round(depth / dt)) + 1
    t = np.log(theta) + dt * (np.arange(nt) - (nt - 1))
    Yc = -theta + (2.0 * theta / n_y) * np.arange(n_y)
    TT, YY = np.meshgrid(np.exp(t), Yc, indexing="ij")
    curve_seed = None
    world, r = _chart_solve(domain, P, R, TT, YY, s_base, curve_seed)
    d_y = r.normal @ e2
    lap_d = -r.kappa / (1.0 - TT * r.kappa)
    jac = r.normal @ e1
    # periodicity test against the column at Y = +theta
    Tcol = np.exp(t)
    _, rr = _chart_solve(domain, P, R, Tcol, np.full(nt, theta), s_base, curve_seed)
    dy_end = rr.normal @ e2
    ld_end = -rr.kappa / (1.0 - Tcol * rr.kappa)
    scale = max(1.0, np.max(np.abs(lap_d)))
    mismatch = max(np.max(np.abs(dy_end - d_y[:, 0])), np.max(np.abs(ld_end - lap_d[:, 0])) / scale)
    periodized = bool(mismatch > 1e-9)
    if periodized:
        from .quadrature import smooth_cutoff
        chi = smooth_cutoff((np.abs(Yc) - 0.5 * theta) / (0.5 * theta))[None, :]
        mid = lap_d[:, n_y // 2][:, None]
        d_y = chi * d_y
        lap_d = chi * lap_d + (1.0 - chi) * mid
    return CollarChart(domain=domain, base_point=P, s_base=s_base, curve=curve,
                       kappa_base=float(pr.kappa[0]), theta=float(theta), rotation=R, t=t,
                       Y=Yc, depth=float(depth), world=world, d_y=d_y, lap_d=lap_d,
                       jacobian=jac, periodized=periodized)
