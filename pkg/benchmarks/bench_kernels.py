"""Time the numba kernels against their numpy twins.

Usage::

    python benchmarks/bench_kernels.py [--h 1/128] [--repeat 5]

Both flavours are called directly (``*_nb`` and ``*_np``), so the
LIOUVILLE_DISABLE_NUMBA flag does not matter here.  The first numba call is
timed separately as compile time.  Results are printed as a table and
checked for agreement (max difference relative to the numpy result's sup).
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from liouville import geometry, kernels, quadrature, solver
from liouville.cli import parse_length


def _best(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def _row(name, fn_nb, fn_np, repeat, compare):
    t0 = time.perf_counter()
    fn_nb()
    first = time.perf_counter() - t0
    t_nb, r_nb = _best(fn_nb, repeat)
    t_np, r_np = _best(fn_np, repeat)
    diff = compare(r_nb, r_np)
    print(f"{name:<18} {first:>10.3f} {t_nb:>10.4f} {t_np:>10.4f} {t_np / t_nb:>8.1f}x {diff:>10.2e}")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--h", type=parse_length, default=1 / 128)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not kernels.HAVE_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")

    dom = geometry.circle()
    grid = geometry.build_grid(dom, args.h, 0.05)
    op = solver.assemble(solver.DirichletProblem(grid, solver.expansion_data(2), lift=True))
    rng = np.random.default_rng(0)
    x = rng.standard_normal(op.n)
    b = op.matvec(x)
    jd = op.diag + 8.0

    m = 200_000
    pts = rng.random((4096, 2))
    vals = rng.standard_normal((4096, 3))
    ii = rng.integers(0, 4096, m).astype(np.int64)
    jj = rng.integers(0, 4096, m).astype(np.int64)

    nt, ny, theta = 96, 32, 0.2
    t = np.log(theta) + np.linspace(-12.0, 0.0, nt)
    K = np.cos(np.linspace(0, 2 * np.pi, ny, endpoint=False))[None, :] * np.exp(t)[:, None]

    print(f"unknowns {op.n}, holder pairs {m}, quadrature grid {nt}x{ny}")
    print(f"{'kernel':<18} {'compile s':>10} {'numba s':>10} {'numpy s':>10} {'speedup':>9} {'rel diff':>10}")
    reldiff = lambda a, c: float(np.max(np.abs(a - c)) / max(np.max(np.abs(c)), 1e-300))
    _row("matvec", lambda: kernels.matvec_nb(op.diag, op.nbr, op.coef, x),
         lambda: kernels.matvec_np(op.diag, op.nbr, op.coef, x), args.repeat, reldiff)
    _row("bicgstab", lambda: kernels.bicgstab_nb(jd, op.nbr, op.coef, b, np.zeros_like(b), 1e-12, 20000)[0],
         lambda: kernels.bicgstab_np(jd, op.nbr, op.coef, b, np.zeros_like(b), 1e-12, 20000)[0],
         args.repeat, reldiff)
    _row("holder_quotients", lambda: kernels.holder_quotients_nb(vals, pts, ii, jj, 0.5),
         lambda: kernels.holder_quotients_np(vals, pts, ii, jj, 0.5), args.repeat, reldiff)
    _row("tilde_log_grid", lambda: quadrature.tilde_log_grid_nb(K, t, theta, 1e-10),
         lambda: quadrature.tilde_log_grid_np(K, t, theta, 1e-10), max(1, args.repeat // 2), reldiff)


if __name__ == "__main__":
    main()
