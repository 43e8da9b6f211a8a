"""Masked lattice discretization of a planar domain.

Fields are plain ``(n, n)`` float arrays indexed ``u[i, j]`` at the node
``(x[i], y[j])``.  A valid field vanishes at every boundary and exterior
node, which is the discrete form of the zero-trace condition.  All
operators below are pure functions of ``(grid, field)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigurationError, DimensionError, RangeError, SolverError

__all__ = [
    "EXTERIOR",
    "BOUNDARY",
    "INTERIOR",
    "Grid",
    "build_grid",
    "laplacian",
    "grad",
    "grad_sq",
    "integrate",
    "dirichlet_energy",
    "dirichlet_form",
    "boundary_flux",
    "dirichlet_solve",
    "sample",
]

EXTERIOR, BOUNDARY, INTERIOR = 0, 1, 2

MIN_NODES = 65


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform ``n x n`` lattice with a domain mask.

    ``shape='square'`` covers ``[0, extent]^2`` and its outer ring of
    nodes carries the Dirichlet data.  ``shape='disk'`` is the disk of
    radius ``extent`` centred at the origin inside the box
    ``[-extent, extent]^2``; a node is interior iff
    ``|x| < extent - h/2`` and the cut-cell boundary nodes are the
    non-interior 4-neighbours of interior nodes.
    """

    shape: str
    extent: float
    n: int
    h: float
    origin: float
    mask: np.ndarray = field(repr=False)

    @property
    def cell_area(self) -> float:
        return self.h * self.h

    @property
    def center(self) -> np.ndarray:
        if self.shape == "disk":
            return np.zeros(2)
        return np.full(2, 0.5 * self.extent)

    @property
    def axis(self) -> np.ndarray:
        return self.origin + self.h * np.arange(self.n)

    @cached_property
    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        return tuple(np.meshgrid(self.axis, self.axis, indexing="ij"))

    @cached_property
    def interior(self) -> np.ndarray:
        return self.mask == INTERIOR

    @cached_property
    def boundary(self) -> np.ndarray:
        return self.mask == BOUNDARY

    @property
    def n_interior(self) -> int:
        return int(self.interior.sum())

    @cached_property
    def index(self) -> np.ndarray:
        """Unknown number of each interior node, -1 elsewhere."""
        idx = np.full((self.n, self.n), -1, dtype=np.int64)
        idx[self.interior] = np.arange(self.n_interior)
        return idx

    @cached_property
    def neg_laplacian(self) -> sp.csr_matrix:
        """Sparse ``-Delta_h`` acting on interior unknowns (SPD)."""
        I, J = np.nonzero(self.interior)
        me = self.index[I, J]
        rows = [me]
        cols = [me]
        vals = [np.full(me.size, 4.0)]
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            nb = self.index[I + di, J + dj]
            ok = nb >= 0
            rows.append(me[ok])
            cols.append(nb[ok])
            vals.append(np.full(int(ok.sum()), -1.0))
        m = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.n_interior, self.n_interior),
        )
        return m / self.h**2

    @cached_property
    def boundary_distance(self) -> np.ndarray:
        """Exact distance from each node to the continuous boundary."""
        X, Y = self.coords
        if self.shape == "disk":
            d = self.extent - np.hypot(X, Y)
        else:
            d = np.minimum.reduce([X, self.extent - X, Y, self.extent - Y])
        return np.where(self.mask == EXTERIOR, 0.0, np.maximum(d, 0.0))

    def distance_to_boundary(self, points) -> np.ndarray:
        """Signed distance from points ``(..., 2)`` to the boundary, positive inside."""
        pts = np.asarray(points, dtype=float)
        x, y = pts[..., 0], pts[..., 1]
        if self.shape == "disk":
            return self.extent - np.hypot(x, y)
        return np.minimum.reduce([x, self.extent - x, y, self.extent - y])

    def check(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.n, self.n):
            raise DimensionError(
                f"field shape {u.shape} does not match grid ({self.n}, {self.n})"
            )
        return u

    def restrict(self, u: np.ndarray) -> np.ndarray:
        """Vector of interior values in unknown order."""
        return self.check(u)[self.interior]

    def prolong(self, vec: np.ndarray) -> np.ndarray:
        """Full field from interior values; zero on boundary and exterior."""
        out = np.zeros((self.n, self.n))
        out[self.interior] = vec
        return out

    def zeros(self) -> np.ndarray:
        return np.zeros((self.n, self.n))

    def from_function(self, f) -> np.ndarray:
        """Evaluate ``f(X, Y)`` at interior nodes, zero elsewhere."""
        X, Y = self.coords
        return np.where(self.interior, f(X, Y), 0.0)


def build_grid(shape: str, extent: float, n: int) -> Grid:
    """Build the masked lattice for a square or disk domain."""
    if shape not in ("square", "disk"):
        raise ConfigurationError(f"unknown domain shape {shape!r}")
    if not extent > 0:
        raise ConfigurationError(f"extent must be positive, got {extent}")
    if int(n) != n or n < MIN_NODES or n % 2 == 0:
        raise ConfigurationError(f"n must be odd and >= {MIN_NODES}, got {n}")
    n = int(n)
    extent = float(extent)
    if shape == "square":
        h = extent / (n - 1)
        origin = 0.0
        mask = np.full((n, n), INTERIOR, dtype=np.int8)
        mask[[0, -1], :] = BOUNDARY
        mask[:, [0, -1]] = BOUNDARY
    else:
        h = 2.0 * extent / (n - 1)
        origin = -extent
        ax = origin + h * np.arange(n)
        X, Y = np.meshgrid(ax, ax, indexing="ij")
        inner = np.hypot(X, Y) < extent - 0.5 * h
        near = np.zeros_like(inner)
        near[1:, :] |= inner[:-1, :]
        near[:-1, :] |= inner[1:, :]
        near[:, 1:] |= inner[:, :-1]
        near[:, :-1] |= inner[:, 1:]
        mask = np.full((n, n), EXTERIOR, dtype=np.int8)
        mask[near & ~inner] = BOUNDARY
        mask[inner] = INTERIOR
    return Grid(shape=shape, extent=extent, n=n, h=h, origin=origin, mask=mask)


def laplacian(grid: Grid, u: np.ndarray) -> np.ndarray:
    """Five-point Laplacian at interior nodes, zero elsewhere."""
    u = grid.check(u)
    lap = np.zeros_like(u)
    lap[1:-1, 1:-1] = (
        u[2:, 1:-1] + u[:-2, 1:-1] + u[1:-1, 2:] + u[1:-1, :-2] - 4.0 * u[1:-1, 1:-1]
    ) / grid.h**2
    lap[~grid.interior] = 0.0
    return lap


def grad(grid: Grid, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nodal gradient.

    Central differences at interior nodes; at boundary nodes a one-sided
    difference toward the interior neighbour along each axis; zero at
    exterior nodes.
    """
    u = grid.check(u)
    h = grid.h
    inner = grid.interior
    out = []
    for axis in (0, 1):
        fwd = np.zeros_like(u)
        bwd = np.zeros_like(u)
        has_fwd = np.zeros(u.shape, dtype=bool)
        has_bwd = np.zeros(u.shape, dtype=bool)
        if axis == 0:
            fwd[:-1, :] = (u[1:, :] - u[:-1, :]) / h
            bwd[1:, :] = (u[1:, :] - u[:-1, :]) / h
            has_fwd[:-1, :] = inner[1:, :]
            has_bwd[1:, :] = inner[:-1, :]
        else:
            fwd[:, :-1] = (u[:, 1:] - u[:, :-1]) / h
            bwd[:, 1:] = (u[:, 1:] - u[:, :-1]) / h
            has_fwd[:, :-1] = inner[:, 1:]
            has_bwd[:, 1:] = inner[:, :-1]
        g = np.where(inner, 0.5 * (fwd + bwd), 0.0)
        edge = grid.boundary
        g = np.where(edge & has_fwd, fwd, g)
        g = np.where(edge & ~has_fwd & has_bwd, bwd, g)
        out.append(g)
    return out[0], out[1]


def grad_sq(grid: Grid, u: np.ndarray) -> np.ndarray:
    gx, gy = grad(grid, u)
    return gx * gx + gy * gy


def integrate(grid: Grid, f: np.ndarray) -> float:
    """Midpoint rule: weight ``h^2`` per interior node."""
    f = grid.check(f)
    return float(f[grid.interior].sum() * grid.cell_area)


def dirichlet_form(grid: Grid, u: np.ndarray, v: np.ndarray) -> float:
    """Edge-based bilinear form ``-int u Delta_h v`` for zero-trace fields."""
    a = grid.restrict(u)
    b = grid.restrict(v)
    return float(a @ (grid.neg_laplacian @ b)) * grid.cell_area


def dirichlet_energy(grid: Grid, u: np.ndarray) -> float:
    """Discrete ``int |grad u|^2``: sum of squared edge differences."""
    return dirichlet_form(grid, u, u)


def boundary_flux(grid: Grid, u: np.ndarray) -> float:
    """Discrete outward flux ``int_{dOmega} du/dn``.

    Every interior-to-boundary lattice edge contributes the outward
    one-sided difference times the edge length element ``h``.  The sum
    equals ``integrate(laplacian(u))`` exactly (discrete Green identity).
    """
    u = grid.check(u)
    inner = grid.interior
    edge = grid.boundary
    total = 0.0
    for sl_in, sl_out in (
        ((slice(0, -1), slice(None)), (slice(1, None), slice(None))),
        ((slice(1, None), slice(None)), (slice(0, -1), slice(None))),
        ((slice(None), slice(0, -1)), (slice(None), slice(1, None))),
        ((slice(None), slice(1, None)), (slice(None), slice(0, -1))),
    ):
        pairs = inner[sl_in] & edge[sl_out]
        total += float(np.sum((u[sl_out] - u[sl_in])[pairs]))
    return total  # (diff / h) * h


def dirichlet_solve(
    grid: Grid, rhs: np.ndarray, rtol: float = 1e-10, maxiter: int | None = None
) -> np.ndarray:
    """Solve ``-Delta_h phi = rhs`` with ``phi = 0`` off the interior.

    Jacobi-preconditioned conjugate gradients to relative residual
    ``rtol``.
    """
    b = grid.restrict(rhs)
    if not np.all(np.isfinite(b)):
        raise SolverError("right-hand side is not finite")
    if not np.any(b):
        return grid.zeros()
    A = grid.neg_laplacian
    M = sp.diags(1.0 / A.diagonal())
    if maxiter is None:
        maxiter = 20 * grid.n
    x, info = spla.cg(A, b, rtol=rtol, atol=0.0, maxiter=maxiter, M=M)
    res = float(np.linalg.norm(b - A @ x) / np.linalg.norm(b))
    if info != 0 or res > 10 * rtol:
        raise SolverError(f"CG did not converge (relative residual {res:.3e})", res)
    return grid.prolong(x)


def sample(grid: Grid, u: np.ndarray, points) -> np.ndarray | float:
    """Bilinear interpolation of nodal values at arbitrary points.

    ``points`` has shape ``(..., 2)``.  Exterior nodes hold zero, so they
    contribute zero.  Points outside the lattice bounding box raise
    :class:`RangeError`.
    """
    u = grid.check(u)
    pts = np.asarray(points, dtype=float)
    scalar = pts.ndim == 1
    pts = np.atleast_2d(pts)
    s = (pts - grid.origin) / grid.h
    top = grid.n - 1
    tol = 1e-9
    if np.any(s < -tol) or np.any(s > top + tol):
        raise RangeError("sample point outside the grid bounding box")
    s = np.clip(s, 0.0, top)
    i0 = np.minimum(np.floor(s).astype(np.int64), top - 1)
    f = s - i0
    fx, fy = f[..., 0], f[..., 1]
    ix, iy = i0[..., 0], i0[..., 1]
    val = (
        (1 - fx) * (1 - fy) * u[ix, iy]
        + fx * (1 - fy) * u[ix + 1, iy]
        + (1 - fx) * fy * u[ix, iy + 1]
        + fx * fy * u[ix + 1, iy + 1]
    )
    return float(val[0]) if scalar else val
