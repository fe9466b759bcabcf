"""Discrete weighted Hoelder seminorms.

For weight j the sampled quantity is T^j grad^j f: f itself, (T f_T, T f_Y)
or (T^2 f_TT, T^2 f_TY, T^2 f_YY).  The seminorm estimate is the largest
quotient |F(p) - F(q)| / |p - q|^alpha over a pair set that is exhaustive for
small node sets and otherwise a seeded random sample plus, for chart fields,
every pair at dyadic index offsets along T and along Y.  Quotients are binned
by dyadic distance class so that the report shows at which scale the
maximum is reached.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .fields import CollarField


@dataclass
class HolderReport:
    alpha: float
    weight: int
    seminorm: float
    witness: tuple
    classes: list = field(default_factory=list)
    n_pairs: int = 0
    exhaustive: bool = False
    seed: int = 0

    def to_dict(self):
        return {"alpha": self.alpha, "weight": self.weight, "seminorm": self.seminorm,
                "witness": [list(map(float, w)) for w in self.witness],
                "classes": self.classes, "n_pairs": self.n_pairs,
                "exhaustive": self.exhaustive, "seed": self.seed}


def weighted_derivatives(f: CollarField, j):
    """Columns of T^j grad^j f on the chart nodes, as an (nt*ny, ncomp) array."""
    from .fuchsian import _d_t, _d_y

    c = f.chart
    F = f.values
    T = c.T[:, None]
    if j == 0:
        comps = [F]
    elif j == 1:
        comps = [_d_t(F, c.dt), T * _d_y(F, c.dY)]
    elif j == 2:
        DF = _d_t(F, c.dt)
        comps = [_d_t(DF, c.dt) - DF,            # T^2 f_TT = (D^2 - D) f
                 T * _d_y(DF, c.dY),              # T^2 f_TY = T d_Y (D f)
                 T * T * _d_y(_d_y(F, c.dY), c.dY)]
    else:
        raise ValueError("weight must be 0, 1 or 2")
    return np.stack([x.ravel() for x in comps], axis=1)


def _chart_points(chart):
    TT, YY = np.meshgrid(chart.T, chart.Y, indexing="ij")
    return np.stack([TT.ravel(), YY.ravel()], axis=1)


def _offset_pairs(shape):
    nt, ny = shape
    idx = np.arange(nt * ny).reshape(nt, ny)
    ii, jj = [], []
    k = 1
    while k < max(nt, ny):
        if k < nt:
            ii.append(idx[:-k].ravel())
            jj.append(idx[k:].ravel())
        if k < ny:
            ii.append(idx[:, :-k].ravel())
            jj.append(idx[:, k:].ravel())
        k *= 2
    return np.concatenate(ii), np.concatenate(jj)


def holder_seminorm(f, alpha, weight=0, seed=0, max_exhaustive=10_000,
                    n_random=1_000_000, region=None, chunk=1 << 20):
    """Hoelder seminorm estimate of T^weight grad^weight f.

    ``f`` is a CollarField, or a pair ``(points, values)`` with values of
    shape (N,) or (N, ncomp) when the weighted quantity is already formed.
    ``region`` optionally restricts the nodes (boolean mask over the nodes).
    """
    if isinstance(f, CollarField):
        vals = weighted_derivatives(f, weight)
        pts = _chart_points(f.chart)
        shape = f.values.shape
    else:
        pts, vals = f
        pts = np.asarray(pts, dtype=float)
        vals = np.asarray(vals, dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        shape = None
    if region is not None:
        keep = np.asarray(region).ravel()
        sel = np.flatnonzero(keep)
    else:
        sel = np.arange(pts.shape[0])
    finite = np.all(np.isfinite(vals[sel]), axis=1)
    sel = sel[finite]
    n = sel.size
    vals = np.ascontiguousarray(vals)
    pts = np.ascontiguousarray(pts)
    rng = np.random.default_rng(seed)

    def batches():
        if n <= max_exhaustive:
            step = max(1, chunk // max(n, 1))
            for lo in range(0, n, step):
                a = np.repeat(np.arange(lo, min(lo + step, n)), n)
                b = np.tile(np.arange(n), min(lo + step, n) - lo)
                keep = b > a
                yield sel[a[keep]], sel[b[keep]]
            return
        done = 0
        while done < n_random:
            m = min(chunk, n_random - done)
            yield sel[rng.integers(0, n, m)], sel[rng.integers(0, n, m)]
            done += m
        if shape is not None:
            a, b = _offset_pairs(shape)
            ok = np.isin(a, sel) & np.isin(b, sel)
            yield a[ok], b[ok]

    best = -1.0
    witness = ((np.nan, np.nan), (np.nan, np.nan))
    cls_max = {}
    cls_cnt = {}
    total = 0
    spacing = None
    for a, b in batches():
        if a.size == 0:
            continue
        q = kernels.holder_quotients(vals, pts, a.astype(np.int64), b.astype(np.int64),
                                     float(alpha))
        dist = np.hypot(*(pts[a] - pts[b]).T)
        pos = dist > 0
        if spacing is None and pos.any():
            spacing = float(np.min(dist[pos]))
        total += int(pos.sum())
        k = int(np.argmax(q))
        if q[k] > best:
            best = float(q[k])
            witness = (tuple(pts[a[k]]), tuple(pts[b[k]]))
        c = np.floor(np.log2(np.maximum(dist[pos], 1e-300) / spacing)).astype(int)
        qq = q[pos]
        for cl in np.unique(c):
            m = c == cl
            cls_max[cl] = max(cls_max.get(cl, 0.0), float(qq[m].max()))
            cls_cnt[cl] = cls_cnt.get(cl, 0) + int(m.sum())
    classes = [{"class": int(cl), "dist_lo": spacing * 2.0 ** cl if spacing else 0.0,
                "max": cls_max[cl], "pairs": cls_cnt[cl]} for cl in sorted(cls_max)]
    return HolderReport(float(alpha), int(weight), max(best, 0.0), witness, classes, total,
                        n <= max_exhaustive, int(seed))
