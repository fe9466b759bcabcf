"""Closed-form hyperbolic radii on disks and annuli.

Disk of radius r0:          v = r0 - r^2 / r0 = 2d - d^2 / r0   (d = r0 - r)
Annulus r0 < r < 1/r0:      v = (4/pi) |ln r0| cos(pi ln r / (2 ln r0)) r

The printed annulus constant carries ``ln r0`` without absolute value, which
is negative for r0 < 1; the positive branch is the one that solves the
equation (checked by :func:`radial_residual`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry


class OracleDomainError(ValueError):
    pass


@dataclass(frozen=True)
class RadialOracle:
    kind: str
    r0: float
    center: tuple = (0.0, 0.0)

    def __post_init__(self):
        if self.kind == "disk":
            if not self.r0 > 0:
                raise OracleDomainError("disk oracle needs r0 > 0")
        elif self.kind == "annulus":
            if not 0 < self.r0 < 1:
                raise OracleDomainError("annulus oracle needs 0 < r0 < 1")
        else:
            raise OracleDomainError(f"unknown oracle kind {self.kind!r}")

    # geometry -------------------------------------------------------------

    def radius(self, p):
        p = np.asarray(p, dtype=float)
        return np.hypot(p[..., 0] - self.center[0], p[..., 1] - self.center[1])

    def inside(self, p):
        r = self.radius(p)
        if self.kind == "disk":
            return r < self.r0
        return (r > self.r0) & (r < 1.0 / self.r0)

    def distance(self, p):
        r = self.radius(p)
        if self.kind == "disk":
            return self.r0 - r
        return np.minimum(r - self.r0, 1.0 / self.r0 - r)

    def domain(self):
        if self.kind == "disk":
            return geometry.circle(self.center, self.r0)
        return geometry.annulus(self.center, self.r0)

    # radial profile ---------------------------------------------------------

    def _beta(self):
        return np.pi / (2.0 * np.log(self.r0))

    def _amp(self):
        return 4.0 / np.pi * abs(np.log(self.r0))

    def v_of_r(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "disk":
            return self.r0 - r * r / self.r0
        return self._amp() * np.cos(self._beta() * np.log(r)) * r

    def dv_of_r(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "disk":
            return -2.0 * r / self.r0
        b, rho = self._beta(), np.log(r)
        return self._amp() * (np.cos(b * rho) - b * np.sin(b * rho))

    def lap_v_of_r(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "disk":
            return np.full_like(r, -4.0 / self.r0)
        b, rho = self._beta(), np.log(r)
        return self._amp() * ((1 - b * b) * np.cos(b * rho) - 2 * b * np.sin(b * rho)) / r

    # field evaluations ------------------------------------------------------

    def v(self, p, check=True):
        if check and not np.all(self.inside(p)):
            raise OracleDomainError("point outside the oracle domain")
        return self.v_of_r(self.radius(p))

    def u(self, p, check=True):
        return -np.log(self.v(p, check))

    def grad_v(self, p):
        p = np.asarray(p, dtype=float)
        r = self.radius(p)
        dv = self.dv_of_r(r)
        with np.errstate(invalid="ignore", divide="ignore"):
            ex = np.where(r > 0, (p[..., 0] - self.center[0]) / r, 0.0)
            ey = np.where(r > 0, (p[..., 1] - self.center[1]) / r, 0.0)
        return np.stack([dv * ex, dv * ey], axis=-1)

    def w(self, p, check=True):
        """Renormalised unknown (v - 2d) / d^2."""
        d = self.distance(p)
        return (self.v(p, check) - 2.0 * d) / (d * d)


def disk_radius(oracle, p):
    if oracle.kind != "disk":
        raise OracleDomainError("disk_radius needs a disk oracle")
    return oracle.v(p)


def annulus_radius(oracle, p):
    if oracle.kind != "annulus":
        raise OracleDomainError("annulus_radius needs an annulus oracle")
    return oracle.v(p)


def oracle_u(oracle, p):
    return oracle.u(p)


def from_domain(domain):
    """Oracle matching a circle or annulus domain, or an error for other kinds."""
    kind = getattr(domain, "kind", None)
    if kind == "circle":
        return RadialOracle("disk", domain.params["radius"], tuple(domain.params["center"]))
    if kind == "annulus":
        return RadialOracle("annulus", domain.params["r0"], tuple(domain.params["center"]))
    raise OracleDomainError(f"no closed-form solution for domain kind {kind!r}")


def radial_residual(oracle, r, step=1e-4):
    """-lap u + 4 e^{2u} for u = -ln v(r), radial central differences of size ``step``."""
    r = np.asarray(r, dtype=float)
    u = lambda s: -np.log(oracle.v_of_r(s))
    um, u0, up = u(r - step), u(r), u(r + step)
    lap = (up - 2 * u0 + um) / step ** 2 + (up - um) / (2 * step * r)
    return -lap + 4.0 * np.exp(2.0 * u0)


def identity_residual(oracle, r):
    """v lap v - |grad v|^2 + 4 from the closed-form derivatives (should vanish)."""
    r = np.asarray(r, dtype=float)
    v = oracle.v_of_r(r)
    return v * oracle.lap_v_of_r(r) - oracle.dv_of_r(r) ** 2 + 4.0
