"""Mollifier, energies J and J_eps, and their first variations.

The Dirichlet term of every energy is the edge-based form
``-int u Delta_h u``, so :func:`residual_eps` is exactly the gradient of
:func:`energy_Jeps` divided by the cell area.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .errors import ParameterError, PreconditionError
from .grid import Grid, dirichlet_energy, grad, integrate, laplacian

__all__ = [
    "BETA_MAX",
    "beta",
    "dbeta",
    "cap_b",
    "plus_power",
    "energy_J",
    "energy_Jeps",
    "residual_eps",
    "jacobian_eps",
    "domain_variation_residual",
]

# sup of beta, attained at t = 1/2
BETA_MAX = 30.0 / 16.0
# sup of |beta'|, attained at t = 1/2 -+ sqrt(3)/6
DBETA_MAX = 10.0 / np.sqrt(3.0)


def beta(t):
    """Bump ``30 t^2 (1-t)^2`` on ``(0, 1)``, zero elsewhere.

    Unit mass, values in ``[0, 15/8]``.  Only C^1 at the endpoints.
    """
    t = np.asarray(t, dtype=float)
    inside = (t > 0.0) & (t < 1.0)
    out = np.where(inside, 30.0 * t * t * (1.0 - t) ** 2, 0.0)
    return out if out.ndim else float(out)


def dbeta(t):
    t = np.asarray(t, dtype=float)
    inside = (t > 0.0) & (t < 1.0)
    out = np.where(inside, 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t), 0.0)
    return out if out.ndim else float(out)


def cap_b(t):
    """Primitive of :func:`beta`: 0 for t <= 0, 1 for t >= 1."""
    t = np.asarray(t, dtype=float)
    c = np.clip(t, 0.0, 1.0)
    out = c**3 * (10.0 - 15.0 * c + 6.0 * c * c)
    out = np.where(t <= 0.0, 0.0, np.where(t >= 1.0, 1.0, out))
    return out if out.ndim else float(out)


def plus_power(u: np.ndarray, k: float) -> np.ndarray:
    """``(u - 1)_+^k`` with an exact zero wherever ``u <= 1``."""
    d = np.maximum(np.asarray(u, dtype=float) - 1.0, 0.0)
    if k == 0:
        return (d > 0).astype(float)
    return d**k


def _check_eps(eps: float) -> None:
    if not eps > 0:
        raise ParameterError(f"epsilon must be positive, got {eps}")


def energy_J(grid: Grid, u: np.ndarray, p: float) -> float:
    """Discrete ``J(u) = int 1/2 |grad u|^2 + chi{u>1} - (u-1)_+^p / p``.

    The indicator counts interior nodes with ``u > 1`` strictly.
    """
    u = grid.check(u)
    measure = grid.cell_area * float(np.count_nonzero(u[grid.interior] > 1.0))
    return 0.5 * dirichlet_energy(grid, u) + measure - integrate(grid, plus_power(u, p)) / p


def energy_Jeps(grid: Grid, u: np.ndarray, p: float, eps: float) -> float:
    """``J_eps``: the indicator replaced by ``B((u - 1)/eps)``."""
    _check_eps(eps)
    u = grid.check(u)
    smooth = integrate(grid, cap_b((u - 1.0) / eps))
    return 0.5 * dirichlet_energy(grid, u) + smooth - integrate(grid, plus_power(u, p)) / p


def residual_eps(grid: Grid, u: np.ndarray, p: float, eps: float) -> np.ndarray:
    """Euler-Lagrange residual ``-Delta_h u + beta((u-1)/eps)/eps - (u-1)_+^{p-1}``.

    Zero off the interior.  Equal to ``grad energy_Jeps / h^2``.
    """
    _check_eps(eps)
    u = grid.check(u)
    g = -laplacian(grid, u) + beta((u - 1.0) / eps) / eps - plus_power(u, p - 1.0)
    g[~grid.interior] = 0.0
    return g


def jacobian_eps(grid: Grid, u: np.ndarray, p: float, eps: float) -> sp.csc_matrix:
    """Jacobian of :func:`residual_eps` on interior unknowns."""
    _check_eps(eps)
    v = grid.restrict(u)
    diag = dbeta((v - 1.0) / eps) / eps**2 - (p - 1.0) * plus_power(v, p - 2.0)
    return (grid.neg_laplacian + sp.diags(diag)).tocsc()


def domain_variation_residual(
    grid: Grid,
    u: np.ndarray,
    p: float,
    phi: tuple[np.ndarray, np.ndarray],
    mode: str = "limit",
    eps: float | None = None,
) -> float:
    """Inner-variation functional for a vector field ``phi``.

    Returns the quadrature of
    ``(1/2|grad u|^2 + I(u) - (u-1)_+^p/p) div phi - grad u . (D phi) grad u``
    with ``I = B((u-1)/eps)`` in ``mode='eps'`` and ``I = chi{u>1}`` in
    ``mode='limit'``.  The value vanishes at critical points.  ``phi`` must
    vanish at every node within ``2h`` of the boundary.
    """
    u = grid.check(u)
    px, py = (grid.check(c) for c in phi)
    near = grid.boundary_distance < 2.0 * grid.h
    if np.any(px[near] != 0.0) or np.any(py[near] != 0.0):
        raise PreconditionError("vector field must vanish within 2h of the boundary")
    if mode == "eps":
        if eps is None:
            raise ParameterError("mode 'eps' requires eps")
        _check_eps(eps)
        ind = cap_b((u - 1.0) / eps)
    elif mode == "limit":
        ind = (u > 1.0).astype(float)
    else:
        raise ParameterError(f"unknown mode {mode!r}")
    h = grid.h
    ux, uy = grad(grid, u)
    dpx_dx, dpx_dy = np.gradient(px, h)
    dpy_dx, dpy_dy = np.gradient(py, h)
    div = dpx_dx + dpy_dy
    dens = 0.5 * (ux * ux + uy * uy) + ind - plus_power(u, p) / p
    quad = ux * (dpx_dx * ux + dpx_dy * uy) + uy * (dpy_dx * ux + dpy_dy * uy)
    return integrate(grid, dens * div - quad)
