"""Hot numeric loops, each in a numba and a pure-numpy flavour.

The numba versions are used when numba imports and the environment variable
``LIOUVILLE_DISABLE_NUMBA`` is unset (or ``0``).  Both flavours implement the
same algorithm with the same operation order where it matters, so results
agree to rounding; ``benchmarks/bench_kernels.py`` times one against the other.

Sparse operators are stored in a padded 4-neighbour layout:

* ``diag``  (n,)    diagonal entries,
* ``nbr``   (4, n)  neighbour indices, ``n`` meaning "no neighbour",
* ``coef``  (4, n)  off-diagonal weights (entry is ``-coef``).

so that ``(A x)_k = diag_k x_k - sum_m coef[m, k] x[nbr[m, k]]``.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False


def _env_disables_numba() -> bool:
    flag = os.environ.get("LIOUVILLE_DISABLE_NUMBA", "0").strip().lower()
    return flag not in ("", "0", "false", "no")


USE_NUMBA = HAVE_NUMBA and not _env_disables_numba()

# bicgstab exit flags
CONVERGED = 0
MAXITER = 1
BREAKDOWN = 2


# ---------------------------------------------------------------------------
# numpy flavour
# ---------------------------------------------------------------------------

def matvec_np(diag, nbr, coef, x):
    xe = np.append(x, 0.0)
    return diag * x - (coef * xe[nbr]).sum(axis=0)


def bicgstab_np(diag, nbr, coef, b, x0, rtol, maxiter):
    """Jacobi right-preconditioned BiCGSTAB.  Returns (x, iters, relres, flag)."""
    x = x0.copy()
    inv_d = 1.0 / diag
    bnorm = np.sqrt(np.dot(b, b))
    if bnorm == 0.0:
        return np.zeros_like(b), 0, 0.0, CONVERGED
    r = b - matvec_np(diag, nbr, coef, x)
    rnorm = np.sqrt(np.dot(r, r))
    if rnorm <= rtol * bnorm:
        return x, 0, rnorm / bnorm, CONVERGED
    rhat = r.copy()
    p = np.zeros_like(b)
    v = np.zeros_like(b)
    rho = alpha = omega = 1.0
    for it in range(1, maxiter + 1):
        rho_new = np.dot(rhat, r)
        if rho_new == 0.0 or omega == 0.0:
            return x, it, rnorm / bnorm, BREAKDOWN
        beta = (rho_new / rho) * (alpha / omega)
        p = r + beta * (p - omega * v)
        y = inv_d * p
        v = matvec_np(diag, nbr, coef, y)
        denom = np.dot(rhat, v)
        if denom == 0.0:
            return x, it, rnorm / bnorm, BREAKDOWN
        alpha = rho_new / denom
        s = r - alpha * v
        snorm = np.sqrt(np.dot(s, s))
        if snorm <= rtol * bnorm:
            x = x + alpha * y
            return x, it, snorm / bnorm, CONVERGED
        z = inv_d * s
        t = matvec_np(diag, nbr, coef, z)
        tt = np.dot(t, t)
        if tt == 0.0:
            return x, it, rnorm / bnorm, BREAKDOWN
        omega = np.dot(t, s) / tt
        x = x + alpha * y + omega * z
        r = s - omega * t
        rho = rho_new
        rnorm = np.sqrt(np.dot(r, r))
        if rnorm <= rtol * bnorm:
            return x, it, rnorm / bnorm, CONVERGED
    return x, maxiter, rnorm / bnorm, MAXITER


def holder_quotients_np(vals, pts, ii, jj, alpha, chunk=1 << 18):
    """|F(p_i) - F(p_j)| / |p_i - p_j|**alpha for each pair (Euclidean norms)."""
    out = np.empty(ii.shape[0])
    for lo in range(0, ii.shape[0], chunk):
        a = ii[lo:lo + chunk]
        b = jj[lo:lo + chunk]
        df = vals[a] - vals[b]
        num = np.sqrt((df * df).sum(axis=1))
        dp = pts[a] - pts[b]
        dist = np.sqrt((dp * dp).sum(axis=1))
        q = np.zeros_like(num)
        ok = dist > 0.0
        q[ok] = num[ok] / dist[ok] ** alpha
        out[lo:lo + chunk] = q
    return out


# ---------------------------------------------------------------------------
# numba flavour
# ---------------------------------------------------------------------------

if HAVE_NUMBA:
    _jit = numba.njit(cache=True, fastmath=False)

    @_jit
    def _matvec_into(diag, nbr, coef, x, out):
        n = x.shape[0]
        for k in range(n):
            acc = diag[k] * x[k]
            for m in range(4):
                j = nbr[m, k]
                if j < n:
                    acc -= coef[m, k] * x[j]
            out[k] = acc

    @_jit
    def matvec_nb(diag, nbr, coef, x):
        out = np.empty_like(x)
        _matvec_into(diag, nbr, coef, x, out)
        return out

    @_jit
    def _dot(a, b):
        acc = 0.0
        for k in range(a.shape[0]):
            acc += a[k] * b[k]
        return acc

    @_jit
    def bicgstab_nb(diag, nbr, coef, b, x0, rtol, maxiter):
        n = b.shape[0]
        x = x0.copy()
        bnorm = np.sqrt(_dot(b, b))
        if bnorm == 0.0:
            return np.zeros(n), 0, 0.0, 0
        r = np.empty(n)
        _matvec_into(diag, nbr, coef, x, r)
        for k in range(n):
            r[k] = b[k] - r[k]
        rnorm = np.sqrt(_dot(r, r))
        if rnorm <= rtol * bnorm:
            return x, 0, rnorm / bnorm, 0
        rhat = r.copy()
        p = np.zeros(n)
        v = np.zeros(n)
        y = np.empty(n)
        s = np.empty(n)
        z = np.empty(n)
        t = np.empty(n)
        rho = 1.0
        alpha = 1.0
        omega = 1.0
        for it in range(1, maxiter + 1):
            rho_new = _dot(rhat, r)
            if rho_new == 0.0 or omega == 0.0:
                return x, it, rnorm / bnorm, 2
            beta = (rho_new / rho) * (alpha / omega)
            for k in range(n):
                p[k] = r[k] + beta * (p[k] - omega * v[k])
                y[k] = p[k] / diag[k]
            _matvec_into(diag, nbr, coef, y, v)
            denom = _dot(rhat, v)
            if denom == 0.0:
                return x, it, rnorm / bnorm, 2
            alpha = rho_new / denom
            for k in range(n):
                s[k] = r[k] - alpha * v[k]
            snorm = np.sqrt(_dot(s, s))
            if snorm <= rtol * bnorm:
                for k in range(n):
                    x[k] = x[k] + alpha * y[k]
                return x, it, snorm / bnorm, 0
            for k in range(n):
                z[k] = s[k] / diag[k]
            _matvec_into(diag, nbr, coef, z, t)
            tt = _dot(t, t)
            if tt == 0.0:
                return x, it, rnorm / bnorm, 2
            omega = _dot(t, s) / tt
            for k in range(n):
                x[k] = x[k] + alpha * y[k] + omega * z[k]
                r[k] = s[k] - omega * t[k]
            rho = rho_new
            rnorm = np.sqrt(_dot(r, r))
            if rnorm <= rtol * bnorm:
                return x, it, rnorm / bnorm, 0
        return x, maxiter, rnorm / bnorm, 1

    @_jit
    def holder_quotients_nb(vals, pts, ii, jj, alpha):
        m = ii.shape[0]
        ncomp = vals.shape[1]
        out = np.empty(m)
        for q in range(m):
            a = ii[q]
            b = jj[q]
            num = 0.0
            for c in range(ncomp):
                df = vals[a, c] - vals[b, c]
                num += df * df
            dx = pts[a, 0] - pts[b, 0]
            dy = pts[a, 1] - pts[b, 1]
            dist = np.sqrt(dx * dx + dy * dy)
            if dist > 0.0:
                out[q] = np.sqrt(num) / dist ** alpha
            else:
                out[q] = 0.0
        return out

else:  # pragma: no cover
    matvec_nb = bicgstab_nb = holder_quotients_nb = None


def _pick(nb, np_):
    return nb if USE_NUMBA else np_


matvec = _pick(matvec_nb, matvec_np)
bicgstab = _pick(bicgstab_nb, bicgstab_np)
holder_quotients = _pick(holder_quotients_nb, holder_quotients_np)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
