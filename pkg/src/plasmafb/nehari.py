"""Fibering rays, the Nehari projection and mountain-pass paths.

Every field ``v`` splits as ``v = v_minus + v_plus`` with
``v_plus = (v - 1)_+`` and ``v_minus = min(v, 1)``.  Along the ray
``zeta(s) = v_minus + s v_plus`` the discrete energy is exactly::

    J(zeta(s)) = D_minus/2 + s X + s^2 D_plus/2 + |{v > 1}| - s^p b / p

where ``D_minus``, ``D_plus`` are the Dirichlet energies of the two parts,
``b = int v_plus^p`` and ``X`` is their Dirichlet cross term.  ``X`` lives
on lattice edges that cross the level 1; it vanishes in the continuum
and makes the ray maximum the root of ``X + s D_plus = s^(p-1) b``.
When ``X = 0`` the root is the closed form ``(D_plus / b)^(1/(p-2))``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import NotInWError, PathError, PreconditionError, RangeError
from .grid import Grid, dirichlet_form, integrate

__all__ = [
    "RayDecomposition",
    "NehariData",
    "PathRecord",
    "decompose",
    "ray_coefficients",
    "nehari_data",
    "fibering_s",
    "project_nehari",
    "energy_on_ray",
    "projected_energy",
    "mountain_pass_path",
    "nehari_residual",
]

TINY = 1e-300


@dataclass(frozen=True)
class RayDecomposition:
    v_minus: np.ndarray
    v_plus: np.ndarray


@dataclass(frozen=True)
class RayCoefficients:
    d_minus: float
    d_plus: float
    cross: float
    b: float
    measure: float
    p: float

    def energy(self, s: float) -> float:
        if s <= 0:
            return 0.5 * (1.0 + s) ** 2 * self.d_minus
        return (
            0.5 * self.d_minus
            + s * self.cross
            + 0.5 * s * s * self.d_plus
            + self.measure
            - s**self.p * self.b / self.p
        )

    def slope(self, s: float) -> float:
        """Derivative of :meth:`energy` for ``s > 0``."""
        return self.cross + s * self.d_plus - s ** (self.p - 1.0) * self.b


@dataclass(frozen=True)
class NehariData:
    """Nehari quantities of a field.

    ``a`` is the Dirichlet energy restricted to ``{v > 1}``, i.e.
    ``int grad v . grad v_plus = d_plus + cross``; ``b = int (v-1)_+^p``.
    """

    a: float
    b: float
    d_plus: float
    cross: float
    s_v: float
    residual: float


@dataclass(frozen=True)
class PathRecord:
    s_bar: float
    t: np.ndarray
    energies: np.ndarray

    @property
    def max_energy(self) -> float:
        return float(self.energies.max())


def decompose(v: np.ndarray) -> RayDecomposition:
    v = np.asarray(v, dtype=float)
    plus = np.maximum(v - 1.0, 0.0)
    return RayDecomposition(v_minus=v - plus, v_plus=plus)


def ray_coefficients(grid: Grid, v: np.ndarray, p: float) -> RayCoefficients:
    v = grid.check(v)
    parts = decompose(v)
    vm, vp = parts.v_minus, parts.v_plus
    return RayCoefficients(
        d_minus=dirichlet_form(grid, vm, vm),
        d_plus=dirichlet_form(grid, vp, vp),
        cross=dirichlet_form(grid, vm, vp),
        b=integrate(grid, vp**p),
        measure=grid.cell_area * float(np.count_nonzero(v[grid.interior] > 1.0)),
        p=float(p),
    )


def _fibering_root(c: RayCoefficients) -> float:
    if c.cross == 0.0:
        return (c.d_plus / c.b) ** (1.0 / (c.p - 2.0))
    # slope(s) is concave on s > 0 with slope(0) = cross > 0: a single root
    hi = max((c.d_plus / c.b) ** (1.0 / (c.p - 2.0)), 1e-8)
    while c.slope(hi) > 0.0:
        hi *= 2.0
    lo = hi / 2.0
    while c.slope(lo) < 0.0:
        lo /= 2.0
    return brentq(c.slope, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)


def _coefficients_in_w(grid: Grid, v: np.ndarray, p: float) -> RayCoefficients:
    if not p > 2:
        raise PreconditionError(f"p must exceed 2, got {p}")
    c = ray_coefficients(grid, v, p)
    if not (c.b > 0.0 and c.d_plus > 0.0):
        raise NotInWError("field has no plus part (v <= 1 on the interior)")
    return c


def fibering_s(grid: Grid, v: np.ndarray, p: float) -> float:
    """Scale ``s_v`` maximizing ``s -> J(v_minus + s v_plus)`` over ``s > 0``."""
    return _fibering_root(_coefficients_in_w(grid, v, p))


def project_nehari(grid: Grid, v: np.ndarray, p: float) -> np.ndarray:
    """Projection ``v_minus + s_v v_plus`` onto the discrete Nehari set."""
    s = fibering_s(grid, v, p)
    parts = decompose(v)
    return parts.v_minus + s * parts.v_plus


def energy_on_ray(grid: Grid, v: np.ndarray, p: float, s: float) -> float:
    """Energy ``J(zeta_v(s))`` of the fibering curve through ``v`` (``s = 1``)."""
    if s < -1.0:
        raise RangeError(f"ray parameter must be >= -1, got {s}")
    return ray_coefficients(grid, v, p).energy(float(s))


def projected_energy(grid: Grid, v: np.ndarray, p: float) -> float:
    """``J(pi(v))`` evaluated from the ray coefficients of ``v``.

    On the Nehari set ``s^p b = s^2 D_plus + s X``, giving
    ``D_minus/2 + (1 - 1/p) s X + (1/2 - 1/p) s^2 D_plus + |{v > 1}|``.
    """
    c = _coefficients_in_w(grid, v, p)
    s = _fibering_root(c)
    return (
        0.5 * c.d_minus
        + (1.0 - 1.0 / p) * s * c.cross
        + (0.5 - 1.0 / p) * s * s * c.d_plus
        + c.measure
    )


def nehari_data(grid: Grid, v: np.ndarray, p: float) -> NehariData:
    c = ray_coefficients(grid, v, p)
    a = c.d_plus + c.cross
    if c.b > 0.0 and c.d_plus > 0.0:
        s = _fibering_root(c)
        res = abs(a - c.b) / max(a, c.b, TINY)
    else:
        s = float("nan")
        res = float("inf")
    return NehariData(a=a, b=c.b, d_plus=c.d_plus, cross=c.cross, s_v=s, residual=res)


def nehari_residual(grid: Grid, v: np.ndarray, p: float) -> float:
    """``|a - b| / max(a, b)``; ``inf`` when the plus part vanishes."""
    return nehari_data(grid, v, p).residual


def mountain_pass_path(
    grid: Grid, v: np.ndarray, p: float, samples: int = 201, tol: float = 1e-6
) -> PathRecord:
    """Sample the path ``gamma_v(t) = zeta_v((s_bar + 1) t - 1)``.

    ``s_bar > 1`` is found by doubling until the ray energy is negative.
    For ``v`` on the Nehari set the path maximum is ``J(v)``, attained at
    ``t = 2 / (s_bar + 1)``, which is always among the samples.
    """
    res = nehari_residual(grid, v, p)
    if not res <= tol:
        raise PreconditionError(f"field is not on the Nehari set (residual {res:.3e})")
    c = ray_coefficients(grid, v, p)
    s_bar = 2.0
    for _ in range(60):
        if c.energy(s_bar) < 0.0:
            break
        s_bar *= 2.0
    else:
        raise PathError("no negative energy along the ray within 60 doublings")
    t = np.linspace(0.0, 1.0, samples)
    t = np.union1d(t, [2.0 / (s_bar + 1.0)])
    energies = np.array([c.energy((s_bar + 1.0) * ti - 1.0) for ti in t])
    return PathRecord(s_bar=s_bar, t=t, energies=energies)
