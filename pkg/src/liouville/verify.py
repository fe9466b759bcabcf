"""The invariant suite behind ``liouville verify``.

Every check records what was measured and the tolerance it was held to, so
the report is data: a reader can re-judge a run against different limits
without re-running it.  Checks whose outcome depends on being in the
asymptotic range of the discretisation are not run on grids that are too
coarse for the domain; they are reported as ``insufficient resolution``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from . import asymptotics as asy
from . import fuchsian as fu
from . import geometry as geo
from . import oracles as orc
from . import solver as sol

PASS, FAIL, COARSE, INFO = "pass", "fail", "insufficient resolution", "info"


@dataclass
class Check:
    name: str
    group: str
    measured: object
    tolerance: object
    status: str
    detail: dict = field(default_factory=dict)

    def to_dict(self):
        return {"name": self.name, "group": self.group, "measured": self.measured,
                "tolerance": self.tolerance, "status": self.status, "detail": self.detail}


def _le(name, group, measured, tol, **detail):
    ok = bool(np.isfinite(measured) and measured <= tol)
    return Check(name, group, float(measured), {"max": tol}, PASS if ok else FAIL, detail)


def _ge(name, group, measured, tol, **detail):
    ok = bool(np.isfinite(measured) and measured >= tol)
    return Check(name, group, float(measured), {"min": tol}, PASS if ok else FAIL, detail)


def _within(name, group, measured, lo, hi, **detail):
    m = np.asarray(measured, dtype=float)
    ok = bool(np.all(np.isfinite(m)) and np.all((m >= lo) & (m <= hi)))
    return Check(name, group, m.tolist(), {"min": lo, "max": hi}, PASS if ok else FAIL, detail)


def _coarse(name, group, why):
    return Check(name, group, None, None, COARSE, {"reason": why})


def resolution_limit(domain):
    """Largest grid spacing at which the refinement-sensitive checks are meaningful."""
    scale = min(float(domain.reach_estimate), 1.0)
    if isinstance(domain, geo.HalfPlane):
        x0, x1, y0, y1 = domain.box
        scale = min(x1 - x0, y1 - y0)
    # a few percent of slack so that reach estimates just under a round
    # number do not exclude the matching grid
    return 1.05 * scale / 32.0


def default_probes(domain, n=8):
    """(s, curve) pairs: n per boundary curve, or n heights on the half-plane's box."""
    if isinstance(domain, geo.HalfPlane):
        y0, y1 = domain.box[2:]
        return [(y0 + (y1 - y0) * (k + 1) / (n + 1), 0) for k in range(n)]
    return [(k / n, c) for c in range(len(domain.curves)) for k in range(n)]


def _oracle(domain):
    try:
        return orc.from_domain(domain)
    except orc.OracleDomainError:
        return None


class _HalfPlaneExact:
    """v = 2x on the half-plane, in the oracle interface used here."""

    def v(self, p, check=False):
        return 2.0 * np.asarray(p, float)[..., 0]

    def u(self, p, check=False):
        return -np.log(self.v(p))

    def grad_v(self, p):
        p = np.asarray(p, float)
        return np.stack([np.full(p.shape[:-1], 2.0), np.zeros(p.shape[:-1])], axis=-1)


def exact_solution(domain):
    if isinstance(domain, geo.HalfPlane):
        return _HalfPlaneExact()
    return _oracle(domain)


# ---------------------------------------------------------------------------
# suites
# ---------------------------------------------------------------------------

def geometry_checks(domain, cfg, rng):
    out = []
    if isinstance(domain, geo.HalfPlane):
        x0, x1, y0, y1 = domain.box
        p = np.stack([rng.uniform(x0, x1, 200), rng.uniform(y0, y1, 200)], axis=1)
        err = np.max(np.abs(domain.project(p).d - p[:, 0]))
        out.append(_le("distance_vs_brute_force", "geometry", err, 1e-12))
    else:
        # dense boundary samples; points closer than 0.01 would need a finer
        # sampling than the nearest-sample error bound (spacing^2 / 8d) allows
        s = np.arange(200_000) / 200_000
        bnd = np.concatenate([domain.point(s, c) for c in range(len(domain.curves))])
        xmin, xmax, ymin, ymax = domain.bounds
        p = np.stack([rng.uniform(xmin, xmax, 400), rng.uniform(ymin, ymax, 400)], axis=1)
        r = domain.project(p, check_ambiguity=False)
        keep = (r.d > 0.01) & (r.d < 0.5 * domain.reach_estimate)
        p, d = p[keep], r.d[keep]
        from scipy.spatial import cKDTree

        brute, _ = cKDTree(bnd).query(p)
        out.append(_le("distance_vs_brute_force", "geometry", float(np.max(np.abs(brute - d))),
                       1e-6, n_points=int(keep.sum())))
    chart = _chart(domain, cfg)
    T = chart.T[::8][:, None] * np.ones((1, chart.Y.size))
    Y = np.ones((T.shape[0], 1)) * chart.Y[None, :]
    world = chart.to_world(T, Y)
    d, y = chart.to_chart(world)
    err = float(max(np.max(np.abs(d - T)), np.max(np.abs(y - Y))))
    out.append(_le("collar_chart_round_trip", "geometry", err, 1e-10))
    return out


def oracle_checks(domain, cfg):
    exact = exact_solution(domain)
    if exact is None:
        return [Check("oracle_available", "oracle", False, None, INFO,
                      {"reason": "no closed form for this domain"})]
    out = []
    if isinstance(exact, orc.RadialOracle):
        r_in, r_out = (0.0, exact.r0) if exact.kind == "disk" else (exact.r0, 1.0 / exact.r0)
        r = np.linspace(r_in + 0.3, r_out - 0.3, 200) if r_out - r_in > 0.7 else \
            np.linspace(r_in, r_out, 202)[1:-1]
        r = r[r > 1e-3]
        out.append(_le("identity_v_lap_v", "oracle",
                       float(np.max(np.abs(orc.identity_residual(exact, r)))), 1e-10))
        out.append(_le("radial_pde_residual", "oracle",
                       float(np.max(np.abs(orc.radial_residual(exact, r)))), 1e-6,
                       step=1e-4, r_range=[float(r.min()), float(r.max())]))
        ends = [exact.r0] if exact.kind == "disk" else [exact.r0, 1.0 / exact.r0]
        out.append(_le("vanishes_on_boundary", "oracle",
                       float(np.max(np.abs(exact.v_of_r(np.array(ends))))), 1e-12))
        if exact.kind == "disk":
            ang = np.linspace(0, 2 * np.pi, 50)
            rr = np.linspace(0.05, 0.95, 19)[:, None] * exact.r0
            p = np.stack([exact.center[0] + rr * np.cos(ang), exact.center[1] + rr * np.sin(ang)],
                         axis=-1)
            out.append(_le("disk_w_is_minus_inverse_radius", "oracle",
                           float(np.max(np.abs(exact.w(p) + 1.0 / exact.r0))), 1e-9))
    return out


def _chart(domain, cfg):
    theta = min(cfg.theta, 0.4 * float(domain.reach_estimate))
    return geo.collar_chart(domain, cfg.s_base, theta, n_y=cfg.n_y)


def _sup_error(u, exact):
    m = u.mask
    return float(np.max(np.abs(u.values[m] - exact.u(u.grid.points()[m], check=False))))


def solver_checks(domain, cfg, state):
    out = []
    h = cfg.h_grid
    u, rep = sol.trimmed_solve(domain, cfg.trim, cfg.order, h, tol=cfg.tol)
    state["u"], state["report"] = u, rep
    out.append(Check("newton_converged", "solver", bool(rep.converged), True,
                     PASS if rep.converged else FAIL,
                     {"iterations": rep.iterations, "merit": rep.residual_norms[-1:]}))
    seq = sol.maximal_sequence(domain, cfg.n_values, max(h, 1 / 64), tol=cfg.tol)
    viol = max(r.notes.get("monotone_violation", 0.0) for _, r in seq)
    out.append(_le("maximal_sequence_monotone", "solver", viol, 1e-8, n_values=list(cfg.n_values)))
    coarse = h > resolution_limit(domain)
    exact = exact_solution(domain)
    exact_data = None if exact is None else sol.function_data(lambda p: exact.u(p, check=False))
    if exact is not None:
        # exact Dirichlet data: the expansion data carry an O(trim^2) modelling
        # error that is not a property of the discretisation
        if coarse:
            out.append(_coarse("solver_error_vs_exact", "solver", "grid spacing above limit"))
        else:
            ue, _ = sol.trimmed_solve(domain, cfg.trim, cfg.order, h, tol=cfg.tol, data=exact_data)
            out.append(_le("solver_error_vs_exact", "solver", _sup_error(ue, exact),
                           cfg.error_constant * h * h, h=h, data="exact"))
    if coarse:
        out.append(_coarse("refinement_order", "solver",
                           f"h = {h} exceeds {resolution_limit(domain):.4g}"))
        return out
    hs = [4 * h, 2 * h, h]
    trim = cfg.refine_trim
    if exact is not None:
        def task(hh):
            uu, _ = sol.trimmed_solve(domain, trim, cfg.order, hh, tol=cfg.tol, data=exact_data)
            return _sup_error(uu, exact)
        table = asy.convergence_study(task, hs)
        kind = "error vs exact"
    else:
        fields = [sol.trimmed_solve(domain, trim, cfg.order, hh, tol=cfg.tol)[0] for hh in hs]
        diffs = [_common_difference(a, b) for a, b in zip(fields, fields[1:])]
        # difference k compares grids k and k+1, so it is indexed by the coarser h
        table = asy.ConvergenceTable(hs[:2], diffs, asy.observed_orders(hs[:2], diffs))
        kind = "differences of successive grids"
    state["convergence"] = table
    # judged on the finest pair; the coarsest grid may still be pre-asymptotic
    out.append(_ge("refinement_order", "solver", table.orders[-1], cfg.order_min,
                   h=hs, errors=table.errors, orders=table.orders, measure=kind, h_trim=trim))
    return out


def _common_difference(coarse, fine):
    """sup |u_coarse - u_fine| over shared nodes (node coordinates are integer multiples of h)."""
    gc, gf = coarse.grid, fine.grid
    k = int(round(gc.h / gf.h))
    jc, ic = np.nonzero(coarse.mask)
    jf = jc * k + int(round(gc.origin[1] / gf.h)) - int(round(gf.origin[1] / gf.h))
    i_f = ic * k + int(round(gc.origin[0] / gf.h)) - int(round(gf.origin[0] / gf.h))
    ok = (jf >= 0) & (jf < gf.ny) & (i_f >= 0) & (i_f < gf.nx)
    a = coarse.values[jc[ok], ic[ok]]
    b = fine.values[jf[ok], i_f[ok]]
    m = np.isfinite(b)
    if not m.any():
        raise ValueError("grids share no solved node")
    return float(np.max(np.abs(a[m] - b[m])))


def fuchsian_checks(domain, cfg, state):
    out = []
    chart = _chart(domain, cfg)
    w0, rep = fu.w0_fixed_point(chart)
    state["w0"], state["chart"] = w0, chart
    out.append(Check("w0_contraction", "fuchsian", rep.contraction, {"max": 0.9},
                     PASS if rep.converged and rep.contraction < 0.9 else FAIL,
                     {"iterations": rep.iterations}))
    kap = chart.kappa_base
    trace = rep.notes["trace_center"]
    out.append(_le("w0_trace_vs_curvature", "fuchsian", abs(trace + kap),
                   0.02 * abs(kap) + 1e-8, trace=trace, kappa=kap))
    res = [np.max(np.abs(fu.lw0_residual(w0).values[:, chart.valid_y]))]
    if res[0] <= 1e-10:
        out.append(_le("Lw0_residual", "fuchsian", res[0], 1e-10))
    else:
        fine = chart.refined()
        w0f, _ = fu.w0_fixed_point(fine)
        res.append(np.max(np.abs(fu.lw0_residual(w0f).values[:, fine.valid_y])))
        order = float(np.log2(res[0] / res[1]))
        out.append(_ge("Lw0_residual_order", "fuchsian", order, cfg.order_min,
                       residuals=[float(x) for x in res], n_y=[chart.Y.size, fine.Y.size]))
    u = state.get("u")
    if u is None:
        return out
    if cfg.h_grid > resolution_limit(domain):
        out.append(_coarse("sub_super_envelope", "fuchsian", "grid spacing above limit"))
        return out
    env = asy.envelope_constant(asy.collar_w(u, chart), w0, max(2 * cfg.h_grid, cfg.trim))
    out.append(_le("sub_super_envelope", "fuchsian", env.A_needed, cfg.A,
                   witness_T=env.witness_T, nodes=env.n_nodes))
    return out


def analysis_checks(domain, cfg, state):
    out = []
    u = state.get("u")
    probes = default_probes(domain, cfg.n_probes)
    lo, hi = asy.default_window(domain, max(cfg.h_grid, cfg.trim))
    why = None
    if u is None or cfg.h_grid > resolution_limit(domain):
        why = "grid spacing above limit"
    elif hi < 3 * lo:
        why = f"fit window ({lo:.4g}, {hi:.4g}) spans less than a factor 3"
    if why:
        for name in ("fit_c1", "fit_c2_vs_curvature", "gradient_limit"):
            out.append(_coarse(name, "analysis", why))
        return out
    by_curve = {}
    for s, c in probes:
        by_curve.setdefault(c, []).append(s)
    fits, grads, ratios = [], [], []
    for c, ss in by_curve.items():
        fit = asy.fit_expansion(u, domain, ss, window=(lo, hi), curve=c)
        fits.extend(fit.samples)
        grads.extend(g.limit for g in asy.gradient_limit(u, domain, ss, window=(lo, hi), curve=c))
        ratios.extend(r.sup for r in asy.log_ratio_check(u, domain, ss,
                                                         window=(max(lo, 0.01), 0.2), curve=c))
    state["fits"] = fits
    c1 = np.array([f.c1 for f in fits])
    c2 = np.array([f.c2 for f in fits])
    kap = np.array([f.kappa for f in fits])
    out.append(_le("fit_c1", "analysis", float(np.max(np.abs(c1 - 2))), 0.01))
    rel = np.abs(c2 + kap) / np.maximum(np.abs(kap), 0.05)
    out.append(_le("fit_c2_vs_curvature", "analysis", float(np.max(rel)), cfg.c2_rel_tol,
                   c2=c2.tolist(), kappa=kap.tolist()))
    out.append(_within("gradient_limit", "analysis", grads, 2 - cfg.grad_tol, 2 + cfg.grad_tol))
    exact = _oracle(domain)
    if exact is not None and exact.kind == "disk":
        ref = asy.disk_log_ratio_bound(exact.r0, (max(2 * max(cfg.h_grid, cfg.trim), 0.01), 0.2))
        out.append(_le("log_ratio_vs_exact", "analysis", abs(max(ratios) - ref) / ref, 0.05,
                       measured_sup=max(ratios), exact_sup=ref))
    else:
        out.append(Check("log_ratio_sup", "analysis", float(max(ratios)), None, INFO,
                         {"reason": "no bound is known on this domain"}))
    return out


@dataclass
class SuiteResult:
    checks: list
    tables: dict

    @property
    def exit_code(self):
        st = {c.status for c in self.checks}
        if FAIL in st:
            return 1
        if COARSE in st:
            return 4
        return 0

    def to_dict(self):
        counts = {}
        for c in self.checks:
            counts[c.status] = counts.get(c.status, 0) + 1
        return {"checks": [c.to_dict() for c in self.checks], "counts": counts,
                "exit_code": self.exit_code}

    def checks_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["group", "name", "status", "measured", "tolerance"])
        for c in self.checks:
            w.writerow([c.group, c.name, c.status, _fmt(c.measured), _fmt(c.tolerance)])
        return buf.getvalue()


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    if isinstance(x, dict):
        return ";".join(f"{k}={_fmt(v)}" for k, v in sorted(x.items()))
    if isinstance(x, list):
        return " ".join(_fmt(v) for v in x)
    return str(x)


def run_suite(domain, cfg):
    rng = np.random.default_rng(cfg.seed)
    state = {}
    checks = []
    checks += geometry_checks(domain, cfg, rng)
    checks += oracle_checks(domain, cfg)
    try:
        checks += solver_checks(domain, cfg, state)
    except (sol.RangeError, sol.LinearSolverError) as exc:
        checks.append(Check("solver_exception", "solver", str(exc), None, FAIL))
    checks += fuchsian_checks(domain, cfg, state)
    checks += analysis_checks(domain, cfg, state)
    tables = {}
    if "convergence" in state:
        tables["convergence.csv"] = state["convergence"].to_csv()
    if "fits" in state:
        tables["probes.csv"] = asy.ExpansionFit(state["fits"], ()).to_csv()
    return SuiteResult(checks, tables)
