"""Radial shooting oracle for the disk problem.

Inside the plasma ``u'' + u'/r = -(u-1)^(p-1)`` is integrated outward from
``u(0) = m`` by classical RK4 until ``u = 1`` at ``r = rho``.  Outside, the
harmonic profile ``log(R/r) / log(R/rho)`` matches ``u = 1`` at ``rho`` and
``0`` at ``R``.  The center value ``m`` is fixed by bisection on the
jump condition ``g_in^2 - g_out^2 = 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .errors import OracleError, ParameterError

__all__ = ["RadialProfile", "shoot", "radial_oracle"]


@dataclass(frozen=True)
class Shot:
    m: float
    rho: float
    g_in: float
    g_out: float
    condition: float
    r: np.ndarray
    u: np.ndarray
    du: np.ndarray


def _rhs(r, u, du, p):
    return du, -du / r - max(u - 1.0, 0.0) ** (p - 1.0)


def shoot(m: float, p: float, R: float = 1.0, steps: int = 4000) -> Shot:
    """Integrate from the center; ``condition = -inf`` if ``u`` stays above 1."""
    dr = R / steps
    a = (m - 1.0) ** (p - 1.0)
    c = (p - 1.0) * (m - 1.0) ** (p - 2.0) * a / 64.0
    # series start avoids the removable singularity of u'/r at r = 0
    r = dr
    u = m - a * r * r / 4.0 + c * r**4
    du = -a * r / 2.0 + 4.0 * c * r**3
    rs, us, dus = [0.0, r], [m, u], [0.0, du]
    while r < R - 0.5 * dr:
        k1u, k1v = _rhs(r, u, du, p)
        k2u, k2v = _rhs(r + dr / 2, u + dr / 2 * k1u, du + dr / 2 * k1v, p)
        k3u, k3v = _rhs(r + dr / 2, u + dr / 2 * k2u, du + dr / 2 * k2v, p)
        k4u, k4v = _rhs(r + dr, u + dr * k3u, du + dr * k3v, p)
        u_new = u + dr / 6 * (k1u + 2 * k2u + 2 * k3u + k4u)
        du_new = du + dr / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
        r_new = r + dr
        rs.append(r_new)
        us.append(u_new)
        dus.append(du_new)
        if u_new <= 1.0:
            rho, g_in = _crossing(r, u, du, r_new, u_new, du_new, p)
            if rho >= R:
                break
            g_out = -1.0 / (rho * math.log(R / rho))
            cond = g_in * g_in - g_out * g_out - 2.0
            return Shot(m, rho, g_in, g_out, cond, np.array(rs), np.array(us), np.array(dus))
        r, u, du = r_new, u_new, du_new
    return Shot(m, math.nan, math.nan, math.nan, -math.inf, np.array(rs), np.array(us),
                np.array(dus))


def _crossing(r0, u0, v0, r1, u1, v1, p):
    """Root of the cubic Hermite interpolant of ``u - 1`` on ``[r0, r1]``."""
    a0 = _rhs(r0, u0, v0, p)[1]
    a1 = _rhs(r1, u1, v1, p)[1]
    spline = CubicHermiteSpline([r0, r1], [u0 - 1.0, u1 - 1.0], [v0, v1])
    t = r0
    lo, hi = r0, r1
    for _ in range(100):
        t = 0.5 * (lo + hi)
        if spline(t) > 0.0:
            lo = t
        else:
            hi = t
        if hi - lo <= 4 * np.finfo(float).eps * hi:
            break
    # slope from the Hermite interpolant of u' (second derivatives known)
    dspline = CubicHermiteSpline([r0, r1], [v0, v1], [a0, a1])
    return float(t), float(dspline(t))


@dataclass(frozen=True)
class RadialProfile:
    """Oracle solution on ``[0, R]``; callable on arrays of radii.

    Beyond ``R`` the call continues the harmonic outer profile, which is
    negative there; lattice boundary nodes just outside the circle then
    carry the values of the smooth extension.
    """

    p: float
    R: float
    m: float
    rho: float
    g_in: float
    g_out: float
    condition_residual: float
    r: np.ndarray
    u: np.ndarray
    _inner: CubicHermiteSpline

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        rr = np.maximum(r, self.rho)
        outer = np.log(self.R / rr) / math.log(self.R / self.rho)
        inner = self._inner(np.clip(r, 0.0, self.rho))
        out = np.where(r < self.rho, inner, outer)
        return out if out.ndim else float(out)


def radial_oracle(
    p: float, R: float = 1.0, tol: float = 1e-10, steps: int = 4000, samples: int = 10_000
) -> RadialProfile:
    """Shoot over ``m in (1, 50]`` until ``|g_in^2 - g_out^2 - 2| <= tol``."""
    if not p > 2.0:
        raise ParameterError(f"p > 2 required, got {p}")
    if not R > 0.0:
        raise ParameterError(f"R must be positive, got {R}")
    lo, hi = 1.0, 50.0
    top = shoot(hi, p, R, steps)
    if not top.condition > 0.0:
        raise OracleError("shooting function has no sign change on m in (1, 50]")
    best = top
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        shot = shoot(mid, p, R, steps)
        if abs(shot.condition) < abs(best.condition):
            best = shot
        if abs(shot.condition) <= tol:
            best = shot
            break
        if shot.condition > 0.0:
            hi = mid
        else:
            lo = mid
    if not abs(best.condition) <= tol:
        raise OracleError(f"bisection stalled at residual {best.condition:.3e}")
    s = best
    keep = s.r < s.rho
    rin = np.append(s.r[keep], s.rho)
    uin = np.append(s.u[keep], 1.0)
    din = np.append(s.du[keep], s.g_in)
    inner = CubicHermiteSpline(rin, uin, din)
    prof = RadialProfile(p, R, s.m, s.rho, s.g_in, s.g_out, s.condition,
                         np.empty(0), np.empty(0), inner)
    r = np.linspace(0.0, R, samples)
    return RadialProfile(p, R, s.m, s.rho, s.g_in, s.g_out, s.condition, r, prof(r), inner)
