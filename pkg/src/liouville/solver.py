"""Newton solver for -lap u + 4 e^{2u} = 0 with Dirichlet data on a grid.

The Laplacian is the Shortley-Weller five-point operator: at a node next to
the boundary the arm towards the boundary is shortened to the cut fraction
and the boundary value enters the right-hand side.  The resulting matrix is
an M-matrix but not symmetric, so the Newton systems go to Jacobi
preconditioned BiCGSTAB.

Near the boundary the maximal solution behaves like -ln(2d) and its
derivatives grow like d^{-k}.  With ``lift=True`` the discrete operator is
corrected by the exact defect of a reference profile u_ref = -chi(d) ln(2d):

    lap_h^lift u = lap_h u + (lap u_ref - lap_h u_ref)

which leaves the Jacobian unchanged and makes the truncation error depend
only on the smooth part u - u_ref.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .fields import GridField
from .geometry import DIRECTIONS, build_grid
from .quadrature import cutoff_integral, smooth_cutoff_inf

EXP_GUARD = 700.0
MAX_CONSTANT_DATA = 12.0


class RangeError(ArithmeticError):
    """e^{2u} would overflow: 2u exceeds the guard at some node."""


class LinearSolverError(RuntimeError):
    pass


class DataError(ValueError):
    pass


# ---------------------------------------------------------------------------
# boundary data
# ---------------------------------------------------------------------------

def constant_data(n):
    if n > MAX_CONSTANT_DATA:
        raise DataError(f"constant data capped at {MAX_CONSTANT_DATA} to avoid overflow")
    return lambda cuts: np.full(cuts["d"].shape, float(n))


def expansion_data(order):
    """-ln(2d) (order 1) or -ln(2d - kappa d^2) (order 2) at the cut points."""
    if order not in (1, 2):
        raise DataError("order must be 1 or 2")

    def data(cuts):
        d = cuts["d"]
        v = 2.0 * d if order == 1 else 2.0 * d - cuts["kappa"] * d * d
        if np.any(v <= 0):
            raise DataError("2d - kappa d^2 <= 0 at a data point; reduce h_trim")
        return -np.log(v)

    return data


def function_data(u):
    """Data from a callable u(points)."""
    return lambda cuts: np.asarray(u(cuts["point"]), dtype=float)


@dataclass
class DirichletProblem:
    grid: object
    boundary_data: object
    lift: bool = False
    lift_eps: float = 0.0


@dataclass
class SolveReport:
    iterations: int = 0
    residual_norms: list = field(default_factory=list)
    linear_iters: list = field(default_factory=list)
    damping_used: list = field(default_factory=list)
    converged: bool = False
    floor: float = 0.0
    notes: dict = field(default_factory=dict)

    def to_dict(self):
        return {"iterations": self.iterations, "residual_norms": self.residual_norms,
                "linear_iters": self.linear_iters, "damping_used": self.damping_used,
                "converged": self.converged, "roundoff_floor": self.floor,
                "notes": self.notes}


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

@dataclass
class Operator:
    """-lap_h on the interior nodes in the padded layout of :mod:`kernels`."""

    diag: np.ndarray
    nbr: np.ndarray
    coef: np.ndarray
    bvec: np.ndarray     # boundary contributions (sum of c_m * g_m)
    corr: np.ndarray     # lift correction lap u_ref - lap_h u_ref (zeros without lift)
    abs_b: np.ndarray    # |c_m g_m| summed, for the roundoff floor

    @property
    def n(self):
        return self.diag.shape[0]

    def matvec(self, x):
        return kernels.matvec(self.diag, self.nbr, self.coef, x)

    def to_sparse(self):
        from scipy import sparse

        n = self.n
        rows = [np.arange(n)]
        cols = [np.arange(n)]
        vals = [self.diag]
        for m in range(4):
            ok = self.nbr[m] < n
            rows.append(np.flatnonzero(ok))
            cols.append(self.nbr[m][ok])
            vals.append(-self.coef[m][ok])
        return sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows),
                                                         np.concatenate(cols))), shape=(n, n))


def _arm_coefficients(grid):
    th = grid.theta[:, grid.interior]  # (4, n) in index order
    h = grid.h
    hE, hW, hN, hS = th * h
    c = np.empty_like(th)
    c[0] = 2.0 / (hE * (hE + hW))
    c[1] = 2.0 / (hW * (hE + hW))
    c[2] = 2.0 / (hN * (hN + hS))
    c[3] = 2.0 / (hS * (hN + hS))
    return c


def _lift_profile(grid, eps):
    """u_ref and lap u_ref at interior nodes; u_ref at the cut points."""
    reach = grid.domain.reach_estimate
    a = min(0.25 * reach, 0.25)
    b = min(0.75 * reach, 0.75)

    def parts(d, kappa):
        # u_ref = -ln(2 (sigma(d) + eps)) with sigma(d) = int_0^d chi: equal
        # to d below a, constant beyond b, C-infinity in between.  Only
        # derivatives of sigma enter, divided by sigma >= a, which keeps the
        # fourth derivatives of u - u_ref (and the truncation error) small.
        tau = (d - a) / (b - a)
        sig = a + (b - a) * cutoff_integral(tau)
        chi, dchi, _ = smooth_cutoff_inf(tau)
        sig = np.where(d <= a, d, sig)
        s1 = chi
        s2 = dchi / (b - a)
        active = d < b
        lap_d = np.zeros_like(d)
        lap_d[active] = -kappa[active] / (1.0 - d[active] * kappa[active])
        se = np.maximum(sig + eps, 1e-300)
        lap_sig = s2 + s1 * lap_d
        return -np.log(2.0 * se), -lap_sig / se + (s1 / se) ** 2

    d = grid.distance[grid.interior]
    kap = grid.kappa_foot[grid.interior]
    u_nodes, lap_nodes = parts(d, kap)
    u_cuts, _ = parts(grid.cuts["d"], grid.cuts["kappa"])
    return u_nodes, lap_nodes, u_cuts


def assemble(problem: DirichletProblem) -> Operator:
    grid = problem.grid
    n = grid.n_interior
    c = _arm_coefficients(grid)
    jj, ii = np.nonzero(grid.interior)
    nbr = np.full((4, n), n, dtype=np.int64)
    coef = np.zeros((4, n))
    for m, (di, dj) in enumerate(DIRECTIONS):
        nj, ni = jj + dj, ii + di
        ok = (nj >= 0) & (nj < grid.ny) & (ni >= 0) & (ni < grid.nx)
        idx = np.full(n, -1, dtype=np.int64)
        idx[ok] = grid.index[nj[ok], ni[ok]]
        inner = (idx >= 0) & (grid.theta[m, jj, ii] == 1.0)
        nbr[m, inner] = idx[inner]
        coef[m, inner] = c[m, inner]
    diag = c.sum(axis=0)

    cuts = grid.cuts
    node, mdir = cuts["node"], cuts["dir"]
    g = np.asarray(problem.boundary_data(cuts), dtype=float)
    if g.shape != node.shape or not np.all(np.isfinite(g)):
        raise DataError("boundary data must be finite at every cut point")
    w = c[mdir, node]
    bvec = np.zeros(n)
    np.add.at(bvec, node, w * g)
    abs_b = np.zeros(n)
    np.add.at(abs_b, node, np.abs(w * g))

    corr = np.zeros(n)
    if problem.lift:
        u_nodes, lap_nodes, u_cuts = _lift_profile(grid, problem.lift_eps)
        bref = np.zeros(n)
        np.add.at(bref, node, w * u_cuts)
        lap_h_ref = -(kernels.matvec(diag, nbr, coef, u_nodes) - bref)
        corr = lap_nodes - lap_h_ref
    return Operator(diag, nbr, coef, bvec, corr, abs_b)


# ---------------------------------------------------------------------------
# residual and Newton
# ---------------------------------------------------------------------------

def _exp2(u):
    if np.any(2.0 * u > EXP_GUARD):
        raise RangeError("2u > 700 at some node: unclipped blow-up data")
    return np.exp(2.0 * u)


def residual_vector(op: Operator, u):
    return op.matvec(u) - op.bvec - op.corr + 4.0 * _exp2(u)


def residual(problem, u):
    """Nodewise -lap_h u + 4 e^{2u} as a GridField (NaN off the interior)."""
    op = assemble(problem) if isinstance(problem, DirichletProblem) else problem
    vec = u.interior_values() if isinstance(u, GridField) else np.asarray(u, dtype=float)
    grid = problem.grid if isinstance(problem, DirichletProblem) else u.grid
    return GridField.from_interior(grid, residual_vector(op, vec), "residual")


def default_initial_guess(grid, cap=None):
    d = grid.distance[grid.interior]
    u0 = -np.log(2.0 * np.maximum(d, grid.h))
    if cap is not None:
        u0 = np.minimum(u0, cap)
    return u0


def newton_solve(problem, u0=None, tol=1e-10, max_iters=50, lin_rtol=1e-12,
                 lin_maxiter=20000, op=None):
    """Damped Newton with sup-norm backtracking.  Returns (GridField, SolveReport).

    Row k has the rounding floor ``64 eps (sum_j |A_kj| max|u| + |b_k| + 4 e^{2u_k})``.
    Rows next to tiny cut fractions carry coefficients of size 1/(theta h^2), so
    their floor can sit far above ``tol``.  The merit is therefore the sup-norm
    of ``F_k / max(1, floor_k / tol)``: the plain sup-norm on ordinary rows,
    with the stiff rows measured in units of their own floor.  Converged means
    merit <= ``tol``.  ``residual_norms`` records the merit per step.
    """
    grid = problem.grid
    op = op if op is not None else assemble(problem)
    if u0 is None:
        u = default_initial_guess(grid)
    elif isinstance(u0, GridField):
        u = u0.interior_values().copy()
    else:
        u = np.array(u0, dtype=float)
    if not np.all(np.isfinite(u)):
        raise DataError("initial guess must be finite")
    rep = SolveReport()
    eps = np.finfo(float).eps
    row_abs = op.diag + np.abs(op.coef).sum(axis=0)

    def weights(u, e2u):
        fl = 64.0 * eps * (row_abs * np.max(np.abs(u)) + op.abs_b + np.abs(op.corr)
                           + 4.0 * e2u)
        return np.maximum(1.0, fl / tol), fl

    e2u = _exp2(u)
    F = residual_vector(op, u)
    wts, fl = weights(u, e2u)
    merit = float(np.max(np.abs(F) / wts))
    rep.residual_norms.append(merit)
    for it in range(1, max_iters + 1):
        if merit <= tol:
            break
        jdiag = op.diag + 8.0 * e2u
        du, nlin, relres, flag = kernels.bicgstab(jdiag, op.nbr, op.coef, -F,
                                                  np.zeros_like(u), lin_rtol, lin_maxiter)
        rep.linear_iters.append(int(nlin))
        if flag == kernels.BREAKDOWN:
            raise LinearSolverError(f"BiCGSTAB breakdown at Newton step {it}")
        if flag == kernels.MAXITER:
            rep.notes.setdefault("linear_maxiter_steps", []).append(it)
        rep.iterations = it
        lam = 1.0
        accepted = False
        while lam >= 1.0 / 64.0:
            trial = u + lam * du
            try:
                e2t = _exp2(trial)
            except RangeError:
                lam *= 0.5
                continue
            Ft = residual_vector(op, trial)
            wt, flt = weights(trial, e2t)
            mt = float(np.max(np.abs(Ft) / wt))
            if mt < merit:
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            rep.notes["stalled"] = True
            break
        u, F, e2u, wts, fl, merit = trial, Ft, e2t, wt, flt, mt
        rep.damping_used.append(lam)
        rep.residual_norms.append(merit)
    rep.converged = bool(merit <= tol)
    rep.floor = float(np.max(fl))
    rep.notes["raw_sup_residual"] = float(np.max(np.abs(F)))
    rep.notes["backend"] = kernels.backend()
    return GridField.from_interior(grid, u, "u"), rep


# ---------------------------------------------------------------------------
# maximal-solution strategies
# ---------------------------------------------------------------------------

def maximal_sequence(domain, n_values, h_grid, tol=1e-10, monotone_tol=1e-8, lift=True):
    """Solutions with constant data n on the boundary, in increasing n.

    The boundary layer of u_n has width about e^{-n}/2, far below the grid
    spacing for n = 8.  With ``lift`` every problem of the sequence uses the
    same reference profile -ln(2(d + e^{-n_max}/2)), so the correction term is
    common to all of them and the data alone increase with n: the discrete
    comparison principle still makes the sequence nodewise nondecreasing.
    Each report records the violation against its predecessor in ``notes``.
    """
    n_values = list(n_values)
    if any(b <= a for a, b in zip(n_values, n_values[1:])):
        raise DataError("n_values must be strictly increasing")
    grid = build_grid(domain, h_grid, 0.0)
    eps_layer = 0.5 * np.exp(-max(n_values))
    out = []
    prev = None
    for n in n_values:
        prob = DirichletProblem(grid, constant_data(n), lift=lift, lift_eps=eps_layer)
        u0 = default_initial_guess(grid, cap=n)
        if prev is not None:
            u0 = np.minimum(np.maximum(u0, prev.interior_values()), n)
        u, rep = newton_solve(prob, u0, tol=tol)
        if prev is not None:
            viol = float(np.max(prev.interior_values() - u.interior_values()))
            rep.notes["monotone_violation"] = max(viol, 0.0)
            rep.notes["monotone_ok"] = viol <= monotone_tol
        rep.notes["n"] = n
        out.append((u, rep))
        prev = u
    return out


def trimmed_solve(domain, h_trim, order=2, h_grid=1 / 128, lift=True, tol=1e-10, data=None):
    """Solve on {d > h_trim} with expansion data -ln(2d [- kappa d^2]) on {d = h_trim}."""
    if not 0 < h_trim < 0.5 * domain.reach_estimate:
        raise DataError("h_trim must lie in (0, reach/2)")
    grid = build_grid(domain, h_grid, h_trim)
    prob = DirichletProblem(grid, data if data is not None else expansion_data(order), lift=lift)
    u, rep = newton_solve(prob, tol=tol)
    rep.notes.update({"h_trim": h_trim, "order": order, "h_grid": h_grid, "lift": lift})
    return u, rep


@dataclass
class MonotonicityReport:
    max_violation: float
    n_compared: int
    ok: bool
    tol: float


def domain_monotonicity(u_outer, u_inner, tol=1e-3):
    """Check u_outer <= u_inner + tol at the inner field's nodes.

    ``u_outer`` may be a GridField (interpolated through v = e^{-u}) or a
    callable of points; ``u_inner`` likewise provides the sample nodes when it
    is a GridField.
    """
    from .fields import RadiusInterpolator

    if isinstance(u_inner, GridField):
        pts = u_inner.grid.points()[u_inner.mask]
        ui = u_inner.values[u_inner.mask]
    else:
        pts, ui = u_inner
    if isinstance(u_outer, GridField):
        uo = RadiusInterpolator(u_outer).u_at(pts)
    else:
        uo = u_outer(pts)
    viol = float(np.max(uo - ui)) if ui.size else 0.0
    return MonotonicityReport(max(viol, 0.0), int(ui.size), viol <= tol, tol)
