"""Free boundary extraction and its geometric statistics.

The free boundary is the level set ``u = 1`` traced by marching squares.
Every ball statistic is centred on contour vertices and uses dyadic
radii ``r = 4h, 8h, ...`` up to ``delta0 / 2``, where ``delta0`` is the
distance from the contour to the domain boundary.
"""

from __future__ import annotations

import math

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import distance_transform_edt
from scipy.optimize import nnls
from skimage.measure import find_contours

from .errors import (
    InsufficientResolutionError,
    ParameterError,
    RangeError,
    TrivialSolutionError,
)
from .grid import Grid, grad, grad_sq, sample

__all__ = [
    "FreeBoundaryCurve",
    "SlopeTable",
    "DensityTable",
    "BlowUp",
    "extract_free_boundary",
    "boundary_gap",
    "dyadic_radii",
    "one_sided_slopes",
    "slope_table",
    "nondegeneracy_constant",
    "sup_growth_constant",
    "density_ratios",
    "perimeter_density",
    "level_set_energy",
    "blow_up",
    "flatness_profile",
]


@dataclass(frozen=True)
class FreeBoundaryCurve:
    """Polylines of ``{u = 1}``.

    ``vertices`` stacks the distinct points of every segment (closing
    duplicates dropped); ``normals`` are unit vectors along the
    interpolated gradient, i.e. pointing into ``{u > 1}``.
    """

    segments: list[np.ndarray]
    closed: list[bool]
    vertices: np.ndarray
    normals: np.ndarray
    component: np.ndarray

    @property
    def n_components(self) -> int:
        return len(self.segments)

    @property
    def length(self) -> float:
        return float(sum(np.linalg.norm(np.diff(s, axis=0), axis=1).sum() for s in self.segments))

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Start and end points of every polyline edge."""
        a = np.concatenate([s[:-1] for s in self.segments])
        b = np.concatenate([s[1:] for s in self.segments])
        return a, b


def _contours(values: np.ndarray, level: float, origin: float, h: float):
    segments, closed = [], []
    for c in find_contours(values, level):
        if len(c) < 2:
            continue
        segments.append(origin + h * c)
        closed.append(bool(np.allclose(c[0], c[-1])))
    return segments, closed


def extract_free_boundary(grid: Grid, u: np.ndarray) -> FreeBoundaryCurve:
    """Marching-squares contour of ``u = 1`` with gradient normals."""
    u = grid.check(u)
    if not np.any(u[grid.interior] > 1.0):
        raise TrivialSolutionError("plus set {u > 1} is empty")
    segments, closed = _contours(u, 1.0, grid.origin, grid.h)
    pts, comp = [], []
    for k, (seg, cl) in enumerate(zip(segments, closed)):
        p = seg[:-1] if cl else seg
        pts.append(p)
        comp.append(np.full(len(p), k))
    vertices = np.concatenate(pts)
    gx, gy = grad(grid, u)
    g = np.stack([sample(grid, gx, vertices), sample(grid, gy, vertices)], axis=-1)
    norm = np.linalg.norm(g, axis=1, keepdims=True)
    normals = g / np.where(norm > 0.0, norm, 1.0)
    return FreeBoundaryCurve(segments, closed, vertices, normals, np.concatenate(comp))


def boundary_gap(grid: Grid, curve: FreeBoundaryCurve) -> float:
    """``delta0``: distance from the extracted contour to the domain boundary."""
    return float(grid.distance_to_boundary(curve.vertices).min())


def dyadic_radii(grid: Grid, r_max: float, r_min_cells: float = 4.0) -> np.ndarray:
    r = r_min_cells * grid.h
    out = []
    while r <= r_max * (1.0 + 1e-12):
        out.append(r)
        r *= 2.0
    return np.array(out)


def _harmonic_basis(x: np.ndarray, y: np.ndarray, degree: int) -> np.ndarray:
    z = x + 1j * y
    cols = [np.ones_like(x)]
    for k in range(1, degree + 1):
        zk = z**k
        cols += [zk.real, zk.imag]
    return np.column_stack(cols)


def one_sided_slopes(
    grid: Grid,
    u: np.ndarray,
    vertex,
    nu,
    method: str = "harmonic",
    radius: float = 8.0,
    band: float = 0.0,
    degree: int = 3,
) -> tuple[float, float]:
    """Normal derivatives ``(alpha, beta)`` of ``u`` from both phases at a vertex.

    ``method='ray'`` samples ``x0 +- k h nu`` for ``k = 1..4`` bilinearly
    and fits ``u - 1 = slope * k h`` by least squares through the vertex.

    ``method='harmonic'`` fits a harmonic polynomial of the given degree
    to the nodal values of each phase within ``radius * h`` of the vertex
    and takes its normal derivative at the vertex.  Plus-side nodes with
    ``u <= 1 + band`` are left out, which removes a smoothed transition
    layer of width ``band``.  Both phases are harmonic up to the source
    term, which is small at this scale, so the fit is insensitive to
    where the contour falls inside a cell.  Vertices whose fitting disk
    leaves the domain raise :class:`RangeError`.
    """
    u = grid.check(u)
    x0 = np.asarray(vertex, dtype=float)
    nu = np.asarray(nu, dtype=float)
    norm = float(np.linalg.norm(nu))
    if not norm > 0.0:
        raise RangeError("vertex normal is undefined (zero gradient)")
    nu = nu / norm
    h = grid.h
    if method == "ray":
        k = np.arange(1, 5) * h
        plus_pts = x0 + k[:, None] * nu
        minus_pts = x0 - k[:, None] * nu
        allpts = np.vstack([plus_pts, minus_pts])
        if np.any(grid.distance_to_boundary(allpts) <= 0.0):
            raise RangeError("slope stencil leaves the domain")
        up = sample(grid, u, plus_pts) - 1.0
        um = sample(grid, u, minus_pts) - 1.0
        kk = float(k @ k)
        return float(abs(k @ up) / kk), float(abs(k @ um) / kk)
    if method != "harmonic":
        raise ParameterError(f"unknown slope method {method!r}")
    if grid.distance_to_boundary(x0) < radius * h:
        raise RangeError("fitting disk leaves the domain")
    reach = int(np.ceil(radius)) + 1
    ci, cj = np.round((x0 - grid.origin) / h).astype(int)
    lo_i, hi_i = max(ci - reach, 0), min(ci + reach + 1, grid.n)
    lo_j, hi_j = max(cj - reach, 0), min(cj + reach + 1, grid.n)
    X, Y = grid.coords
    px = (X[lo_i:hi_i, lo_j:hi_j].ravel() - x0[0]) / h
    py = (Y[lo_i:hi_i, lo_j:hi_j].ravel() - x0[1]) / h
    uu = u[lo_i:hi_i, lo_j:hi_j].ravel()
    inner = grid.interior[lo_i:hi_i, lo_j:hi_j].ravel()
    near = inner & (np.hypot(px, py) <= radius)
    out = []
    ncols = 2 * degree + 1
    for sel in (near & (uu > 1.0 + band), near & (uu <= 1.0)):
        if np.count_nonzero(sel) < 2 * ncols:
            raise RangeError("too few nodes on one side of the vertex")
        coef = np.linalg.lstsq(_harmonic_basis(px[sel], py[sel], degree), uu[sel], rcond=None)[0]
        out.append(abs(coef[1] * nu[0] + coef[2] * nu[1]) / h)
    return float(out[0]), float(out[1])


@dataclass(frozen=True)
class SlopeTable:
    vertex: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    skipped: np.ndarray

    @property
    def condition_error(self) -> np.ndarray:
        """``alpha^2 - beta^2 - 2`` on the vertices that were not skipped."""
        return self.alpha**2 - self.beta**2 - 2.0

    @property
    def median_error(self) -> float:
        e = np.abs(self.condition_error)
        if e.size == 0:
            return float("nan")
        return float(np.median(e))


def slope_table(grid: Grid, u: np.ndarray, curve: FreeBoundaryCurve | None = None,
                **kwargs) -> SlopeTable:
    """:func:`one_sided_slopes` at every vertex; stencil failures are flagged."""
    if curve is None:
        curve = extract_free_boundary(grid, u)
    ids, al, be, skipped = [], [], [], []
    for i, (v, nu) in enumerate(zip(curve.vertices, curve.normals)):
        try:
            a, b = one_sided_slopes(grid, u, v, nu, **kwargs)
        except RangeError:
            skipped.append(i)
            continue
        ids.append(i)
        al.append(a)
        be.append(b)
    return SlopeTable(np.array(ids, dtype=int), np.array(al), np.array(be),
                      np.array(skipped, dtype=int))


def nondegeneracy_constant(
    grid: Grid, u: np.ndarray, samples: int | None = None, r0: float | None = None
) -> float:
    """``min (u(x0) - 1) / dist(x0, {u <= 1})`` over admissible plus nodes.

    Admissible nodes have distance in ``[2h, r0]``, ``r0 = delta0 / 2`` by
    default.  The distance is the exact Euclidean distance between lattice
    nodes.  ``samples`` keeps every k-th admissible node, ordered row-major,
    so that at most that many are used.
    """
    u = grid.check(u)
    plus = (u > 1.0) & grid.interior
    if not np.any(plus):
        raise TrivialSolutionError("plus set {u > 1} is empty")
    if r0 is None:
        r0 = 0.5 * boundary_gap(grid, extract_free_boundary(grid, u))
    dist = distance_transform_edt(plus) * grid.h
    ok = plus & (dist >= 2.0 * grid.h * (1 - 1e-12)) & (dist <= r0)
    vals = ((u - 1.0)[ok] / dist[ok])
    if vals.size == 0:
        raise InsufficientResolutionError("no plus nodes with distance in [2h, r0]")
    if samples is not None and vals.size > samples:
        vals = vals[:: int(np.ceil(vals.size / samples))]
    return float(vals.min())


def _ball_nodes(grid: Grid, x0: np.ndarray, r: float):
    h = grid.h
    reach = int(np.ceil(r / h)) + 1
    ci, cj = np.round((x0 - grid.origin) / h).astype(int)
    si = slice(max(ci - reach, 0), min(ci + reach + 1, grid.n))
    sj = slice(max(cj - reach, 0), min(cj + reach + 1, grid.n))
    X, Y = grid.coords
    inside = np.hypot(X[si, sj] - x0[0], Y[si, sj] - x0[1]) <= r * (1.0 + 1e-12)
    return (si, sj), inside


def _ball_statistics(grid, u, curve, radii):
    rows = []
    for vid, x0 in enumerate(curve.vertices):
        for r in radii:
            sl, inside = _ball_nodes(grid, x0, r)
            rows.append((vid, r, u[sl][inside]))
    return rows


def sup_growth_constant(grid: Grid, u: np.ndarray, curve: FreeBoundaryCurve | None = None) -> float:
    """``min (max_{B_r(x0)} u - 1) / r`` over vertices and dyadic ``r``.

    The ball maximum runs over the lattice nodes in the closed ball and
    bilinear samples on its rim, so a maximum on the rim is not lost to
    the lattice spacing.
    """
    u = grid.check(u)
    if curve is None:
        curve = extract_free_boundary(grid, u)
    radii = dyadic_radii(grid, 0.5 * boundary_gap(grid, curve))
    if radii.size == 0:
        raise InsufficientResolutionError("no dyadic radius fits below delta0/2")
    best = math.inf
    for vid, r, vals in _ball_statistics(grid, u, curve, radii):
        k = max(64, int(np.ceil(8.0 * np.pi * r / grid.h)))
        th = 2.0 * np.pi * np.arange(k) / k
        rim = curve.vertices[vid] + r * np.column_stack([np.cos(th), np.sin(th)])
        top = max(float(vals.max()), float(sample(grid, u, rim).max()))
        best = min(best, (top - 1.0) / r)
    return float(best)


def _length_in_ball(a: np.ndarray, b: np.ndarray, c: np.ndarray, r: float) -> float:
    d = b - a
    f = a - c
    A = np.einsum("ij,ij->i", d, d)
    B = 2.0 * np.einsum("ij,ij->i", f, d)
    C = np.einsum("ij,ij->i", f, f) - r * r
    disc = B * B - 4.0 * A * C
    ok = (disc > 0.0) & (A > 0.0)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    Asafe = np.where(ok, A, 1.0)
    t1 = np.clip((-B - sq) / (2 * Asafe), 0.0, 1.0)
    t2 = np.clip((-B + sq) / (2 * Asafe), 0.0, 1.0)
    return float(np.sum(np.where(ok, (t2 - t1) * np.sqrt(A), 0.0)))


@dataclass(frozen=True)
class DensityTable:
    """Rows ``(vertex, r, plus_fraction, perimeter_density)``."""

    vertex: np.ndarray
    r: np.ndarray
    plus_fraction: np.ndarray
    perimeter_density: np.ndarray

    def rows(self) -> list[tuple[int, float, float, float]]:
        return list(zip(self.vertex.tolist(), self.r.tolist(), self.plus_fraction.tolist(),
                        self.perimeter_density.tolist()))


def density_ratios(grid: Grid, u: np.ndarray, curve: FreeBoundaryCurve | None = None) -> DensityTable:
    """Plus-phase fraction and contour length density of vertex-centred balls."""
    u = grid.check(u)
    if curve is None:
        curve = extract_free_boundary(grid, u)
    radii = dyadic_radii(grid, 0.5 * boundary_gap(grid, curve))
    a, b = curve.edges()
    vid, rr, frac, per = [], [], [], []
    for v, r, vals in _ball_statistics(grid, u, curve, radii):
        vid.append(v)
        rr.append(r)
        frac.append(np.count_nonzero(vals > 1.0) / vals.size)
        per.append(_length_in_ball(a, b, curve.vertices[v], r) / r)
    return DensityTable(np.array(vid, dtype=int), np.array(rr), np.array(frac), np.array(per))


def perimeter_density(grid: Grid, u: np.ndarray, curve: FreeBoundaryCurve | None = None) -> np.ndarray:
    """Rows ``(vertex, r, length(F cap B_r) / r)``."""
    t = density_ratios(grid, u, curve)
    return np.column_stack([t.vertex, t.r, t.perimeter_density])


def _require_ball(grid: Grid, x0, r: float) -> np.ndarray:
    x0 = np.asarray(x0, dtype=float)
    if not r > 0:
        raise RangeError(f"radius must be positive, got {r}")
    if grid.distance_to_boundary(x0) < r:
        raise RangeError("ball leaves the domain")
    return x0


def level_set_energy(grid: Grid, u: np.ndarray, x0, r: float, tau: float) -> tuple[float, float]:
    """``int_{B_r(x0) cap {|u-1| < tau}} |grad u|^2`` and its ratio to ``tau r``."""
    u = grid.check(u)
    x0 = _require_ball(grid, x0, r)
    sl, inside = _ball_nodes(grid, x0, r)
    g2 = grad_sq(grid, u)[sl]
    band = inside & (np.abs(u[sl] - 1.0) < tau)
    value = grid.cell_area * float(g2[band].sum())
    return value, value / (tau * r)


@dataclass(frozen=True)
class BlowUp:
    """``w(y) = (u(x0 + r y) - 1) / r`` on an ``m x m`` lattice over ``[-1, 1]^2``."""

    x0: np.ndarray
    r: float
    y: np.ndarray
    w: np.ndarray

    @property
    def spacing(self) -> float:
        return float(self.y[1] - self.y[0])

    def __call__(self, points) -> np.ndarray:
        """Bilinear evaluation at points of ``[-1, 1]^2``."""
        pts = np.asarray(points, dtype=float)
        m = self.y.size
        s = np.clip((pts + 1.0) / self.spacing, 0.0, m - 1)
        i0 = np.minimum(np.floor(s).astype(int), m - 2)
        f = s - i0
        ix, iy = i0[..., 0], i0[..., 1]
        fx, fy = f[..., 0], f[..., 1]
        w = self.w
        return ((1 - fx) * (1 - fy) * w[ix, iy] + fx * (1 - fy) * w[ix + 1, iy]
                + (1 - fx) * fy * w[ix, iy + 1] + fx * fy * w[ix + 1, iy + 1])

    def contour(self) -> list[np.ndarray]:
        """Polylines of ``w = 0`` in blow-up coordinates."""
        return _contours(self.w, 0.0, -1.0, self.spacing)[0]


def blow_up(grid: Grid, u: np.ndarray, x0, r: float, m: int = 65) -> BlowUp:
    u = grid.check(u)
    x0 = _require_ball(grid, x0, 2.0 * r)
    if m < 2:
        raise ParameterError("blow-up resolution must be >= 2")
    y = np.linspace(-1.0, 1.0, m)
    Y1, Y2 = np.meshgrid(y, y, indexing="ij")
    pts = np.stack([x0[0] + r * Y1, x0[1] + r * Y2], axis=-1)
    w = (sample(grid, u, pts) - 1.0) / r
    return BlowUp(x0, float(r), y, w)


def flatness_profile(
    grid: Grid, u: np.ndarray, x0, radii, m: int = 33, directions: int = 360
) -> list[dict]:
    """Best two-slope profile ``alpha <y,nu>_+ - beta <y,nu>_-`` per radius.

    For each direction of the fan, ``alpha, beta >= 0`` come from a
    nonnegative least-squares fit over the blow-up samples in the unit
    ball; the direction with the smallest squared residual wins and its
    sup-norm misfit on the unit ball is reported.
    """
    angles = 2.0 * np.pi * np.arange(directions) / directions
    rows = []
    for r in radii:
        b = blow_up(grid, u, x0, r, m)
        Y1, Y2 = np.meshgrid(b.y, b.y, indexing="ij")
        disk = Y1**2 + Y2**2 <= 1.0
        y1, y2, w = Y1[disk], Y2[disk], b.w[disk]
        best = None
        for th in angles:
            t = y1 * np.cos(th) + y2 * np.sin(th)
            A = np.column_stack([np.maximum(t, 0.0), -np.maximum(-t, 0.0)])
            coef, res = nnls(A, w)
            if best is None or res < best[0]:
                best = (res, th, coef, A)
        _, th, coef, A = best
        misfit = float(np.abs(A @ coef - w).max())
        rows.append({"r": float(r), "misfit": misfit, "alpha": float(coef[0]),
                     "beta": float(coef[1]), "angle": float(th)})
    return rows
