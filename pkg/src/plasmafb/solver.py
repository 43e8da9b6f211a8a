"""Mountain-pass critical points of J_eps by Nehari-guarded Newton continuation.

The target is a minimizer of J_eps over the set where every fibering ray
is maximized, so each outer iteration first maximizes J_eps along the ray
through the iterate, then takes a damped Newton step on the residual.
The ray step is what keeps the iteration off the trivial branch u = 0.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse.linalg as spla
from scipy.optimize import brentq

from .config import ProblemConfig
from .errors import (
    ConfigurationError,
    ConvergenceError,
    PreconditionError,
    SolverError,
    TrivialSolutionError,
)
from .functional import (
    DBETA_MAX,
    beta,
    cap_b,
    energy_J,
    energy_Jeps,
    jacobian_eps,
    plus_power,
    residual_eps,
)
from .grid import (
    Grid,
    boundary_flux,
    build_grid,
    dirichlet_energy,
    dirichlet_solve,
    grad_sq,
    integrate,
)
from .nehari import decompose, nehari_residual, ray_coefficients

__all__ = [
    "ContinuationSchedule",
    "SolveRecord",
    "SolveTrace",
    "initial_guess",
    "ray_maximize",
    "solve_eps",
    "continuation_solve",
    "barrier_check",
    "lipschitz_estimate",
    "energy_identity_check",
    "plus_set_distance",
]

log = logging.getLogger(__name__)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class ContinuationSchedule:
    eps0: float = 0.2
    factor: float = 0.5
    eps_min: float = 0.01

    def __post_init__(self):
        if not (0.0 < self.factor < 1.0):
            raise ConfigurationError(f"schedule factor must lie in (0, 1), got {self.factor}")
        if not (self.eps0 > self.eps_min > 0.0):
            raise ConfigurationError(
                f"schedule needs eps0 > eps_min > 0, got {self.eps0}, {self.eps_min}"
            )

    def levels(self) -> list[float]:
        out = []
        eps = self.eps0
        while eps > self.eps_min * (1.0 + 1e-12):
            out.append(eps)
            eps *= self.factor
        out.append(self.eps_min)
        return out


@dataclass
class SolveRecord:
    eps: float
    iterations: int
    c_eps: float
    residual: float
    nehari_residual: float
    lipschitz: float
    max_u: float
    barrier_violation: float
    delta0: float
    newton_steps: int = 0
    gradient_steps: int = 0
    inserted: bool = False


@dataclass
class SolveTrace:
    records: list[SolveRecord] = field(default_factory=list)

    @property
    def levels(self) -> np.ndarray:
        return np.array([r.c_eps for r in self.records])

    @property
    def level_spread(self) -> float:
        c = self.levels
        return float((c.max() - c.min()) / max(abs(c).max(), 1e-300))

    def rows(self) -> list[dict]:
        return [asdict(r) for r in self.records]


def initial_guess(grid: Grid, p: float | None = None) -> np.ndarray:
    """Radial cap ``3 max(0, 1 - |x - x_c|^2 / rho0^2)^2``, ``rho0 = extent/2``."""
    X, Y = grid.coords
    cx, cy = grid.center
    rho0 = 0.5 * grid.extent
    q = ((X - cx) ** 2 + (Y - cy) ** 2) / rho0**2
    u0 = 3.0 * np.maximum(0.0, 1.0 - q) ** 2
    return np.where(grid.interior, u0, 0.0)


def _golden_max(f, lo: float, hi: float, rtol: float = 1e-10) -> float:
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > rtol * max(abs(a) + abs(b), 1e-300):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def ray_maximize(grid: Grid, u: np.ndarray, p: float, eps: float) -> tuple[np.ndarray, float]:
    """Replace ``u`` by ``u_minus + s* u_plus`` with ``s*`` maximizing J_eps on the ray.

    Golden-section on ``[0, 4 s_v]`` locates the maximum; a bracketed root
    solve on the exact ray derivative then polishes it to round-off.
    """
    parts = decompose(u)
    plus = parts.v_plus[grid.interior]
    mask = plus > 0.0
    if not np.any(mask):
        raise TrivialSolutionError("iterate has no plus set")
    c = ray_coefficients(grid, u, p)
    w = plus[mask]
    area = grid.cell_area

    def phi(s):
        return (
            s * c.cross
            + 0.5 * s * s * c.d_plus
            + area * float(np.sum(cap_b(s * w / eps)))
            - s**p * c.b / p
        )

    def dphi(s):
        return (
            c.cross
            + s * c.d_plus
            + area * float(np.sum(beta(s * w / eps) * w)) / eps
            - s ** (p - 1.0) * c.b
        )

    s_v = (c.d_plus / c.b) ** (1.0 / (p - 2.0))
    hi = 4.0 * s_v
    while dphi(hi) > 0.0:
        hi *= 2.0
    s = _golden_max(phi, 0.0, hi)
    for width in (1e-6, 1e-3, 1e-1):
        lo_s, hi_s = s * (1.0 - width), s * (1.0 + width)
        if dphi(lo_s) > 0.0 > dphi(hi_s):
            s = brentq(dphi, lo_s, hi_s, xtol=1e-300, rtol=4 * np.finfo(float).eps)
            break
    return parts.v_minus + s * parts.v_plus, s


def plus_set_distance(grid: Grid, u: np.ndarray) -> float:
    """Distance from the nodal plus set ``{u > 1}`` to the boundary."""
    plus = (u > 1.0) & grid.interior
    if not np.any(plus):
        return float("inf")
    return float(grid.boundary_distance[plus].min())


def barrier_check(grid: Grid, u: np.ndarray, p: float) -> float:
    """``max(u - phi0)`` for the barrier ``-Delta phi0 = max (u-1)_+^(p-1)``."""
    a0 = float(plus_power(u[grid.interior], p - 1.0).max(initial=0.0))
    phi0 = dirichlet_solve(grid, np.full((grid.n, grid.n), a0))
    inner = grid.interior
    return float((u[inner] - phi0[inner]).max())


def lipschitz_estimate(grid: Grid, u: np.ndarray) -> tuple[float, list[tuple[float, float]]]:
    """Max central-difference gradient over interior nodes and the ``C/r`` table.

    Table rows are ``(r, r * max{|grad u(x)| : dist(x, dOmega) >= r/2})``;
    on convex domains that set is the union of the balls ``B_{r/2}(x0)``
    with ``B_r(x0)`` inside the domain.
    """
    g = np.sqrt(grad_sq(grid, u))
    live = grid.interior
    L = float(g[live].max(initial=0.0))
    dist = grid.boundary_distance
    table = []
    r = 4.0 * grid.h
    r_max = 2.0 * float(dist.max())
    while r <= r_max:
        sel = live & (dist >= 0.5 * r)
        if np.any(sel):
            table.append((r, r * float(g[sel].max())))
        r *= 2.0
    return L, table


def energy_identity_check(grid: Grid, u: np.ndarray, p: float) -> float:
    """Relative residual of ``int |grad u|^2 = int (u-1)_+^p - int du/dn``."""
    lhs = dirichlet_energy(grid, u)
    rhs = integrate(grid, plus_power(u, p)) - boundary_flux(grid, u)
    scale = max(abs(lhs), abs(rhs))
    if scale == 0.0:
        return 0.0
    return abs(lhs - rhs) / scale


def _record(grid, u, p, eps, iterations, res, newton, gradient) -> SolveRecord:
    L, _ = lipschitz_estimate(grid, u)
    return SolveRecord(
        eps=float(eps),
        iterations=iterations,
        c_eps=energy_Jeps(grid, u, p, eps),
        residual=res,
        nehari_residual=nehari_residual(grid, u, p),
        lipschitz=L,
        max_u=float(u.max()),
        barrier_violation=barrier_check(grid, u, p),
        delta0=plus_set_distance(grid, u),
        newton_steps=newton,
        gradient_steps=gradient,
    )


def solve_eps(
    grid: Grid,
    u_init: np.ndarray,
    p: float,
    eps: float,
    tol: float = 1e-8,
    max_outer: int = 500,
) -> tuple[np.ndarray, SolveRecord]:
    """Critical point of J_eps near ``u_init``.

    Each outer iteration maximizes J_eps along the fibering ray, then tries
    a Newton step on :func:`residual_eps` with Armijo backtracking on the
    residual 2-norm.  A step is accepted only if J_eps (after the next ray
    maximization) does not increase.  If the Armijo search fails, a relaxed
    search keeps only the energy condition; if that fails too, a gradient
    step of length ``1/(8/h^2 + 2 max|beta'|/eps^2)`` is taken.
    """
    if eps < 2.0 * grid.h * (1.0 - 1e-12):
        raise PreconditionError(f"eps = {eps:.4g} is below the 2h floor {2 * grid.h:.4g}")
    u = grid.check(u_init).copy()
    u[~grid.interior] = 0.0
    if not np.any(u[grid.interior] > 1.0):
        raise PreconditionError("initial field has no plus set")

    def res_inf(v):
        return float(np.abs(residual_eps(grid, v, p, eps)).max())

    r0 = res_inf(u)
    if r0 <= tol:
        return u, _record(grid, u, p, eps, 0, r0, 0, 0)

    inner = grid.interior
    e_tol = 1e-12
    tau = 1.0 / (8.0 / grid.h**2 + 2.0 * DBETA_MAX / eps**2)
    newton = gradient = 0
    best = math.inf
    u, _ = ray_maximize(grid, u, p, eps)
    energy = energy_Jeps(grid, u, p, eps)
    for it in range(1, max_outer + 1):
        g = residual_eps(grid, u, p, eps)
        rinf = float(np.abs(g).max())
        best = min(best, rinf)
        if rinf <= tol:
            return u, _record(grid, u, p, eps, it - 1, rinf, newton, gradient)
        gvec = g[inner]
        g2 = float(np.linalg.norm(gvec))
        try:
            d = spla.spsolve(jacobian_eps(grid, u, p, eps), -gvec)
        except RuntimeError:
            d = None
        accepted = None
        if d is not None and np.all(np.isfinite(d)):
            step = grid.prolong(d)
            for relaxed in (False, True):
                lam = 1.0
                while lam >= 2.0**-10:
                    cand = u + lam * step
                    r2 = float(np.linalg.norm(residual_eps(grid, cand, p, eps)[inner]))
                    ok = r2 <= (1.0 - 1e-4 * lam) * g2 if not relaxed else r2 <= 10.0 * g2
                    if ok:
                        try:
                            cand, _ = ray_maximize(grid, cand, p, eps)
                        except TrivialSolutionError:
                            ok = False
                        else:
                            e_new = energy_Jeps(grid, cand, p, eps)
                            ok = e_new <= energy + e_tol * max(1.0, abs(energy))
                    if ok:
                        accepted = (cand, e_new)
                        break
                    lam *= 0.5
                if accepted is not None:
                    break
        if accepted is not None:
            u, energy = accepted
            newton += 1
            continue
        t = tau
        for _ in range(40):
            cand = u - t * g
            try:
                cand, _ = ray_maximize(grid, cand, p, eps)
            except TrivialSolutionError:
                t *= 0.5
                continue
            e_new = energy_Jeps(grid, cand, p, eps)
            if e_new <= energy + e_tol * max(1.0, abs(energy)):
                u, energy = cand, e_new
                gradient += 1
                break
            t *= 0.5
        else:
            raise ConvergenceError(
                f"no descent step available at eps = {eps:.4g} (residual {rinf:.3e})", best
            )
    raise ConvergenceError(
        f"eps = {eps:.4g}: residual {best:.3e} after {max_outer} outer iterations", best
    )


def continuation_solve(
    config: ProblemConfig, grid: Grid | None = None, u_init: np.ndarray | None = None
) -> tuple[np.ndarray, SolveTrace]:
    """Solve along the decreasing epsilon schedule with warm starts.

    When a warm-started solve fails within ``config.attempt_outer``
    iterations, the geometric midpoint between the last accepted epsilon
    and the target is inserted and solved first (marked ``inserted``).
    On failure the partial trace is attached to the exception as ``trace``.
    """
    config.validate()
    if grid is None:
        grid = build_grid(config.shape, config.extent, config.n)
    schedule = config.schedule(grid.h)
    p = config.p
    u = initial_guess(grid, p) if u_init is None else grid.check(u_init).copy()
    trace = SolveTrace()
    prev = None
    for target in schedule.levels():
        stack = [(target, False)]
        depth = 0
        while stack:
            eps, inserted = stack[-1]
            cap = config.max_outer if prev is None else config.attempt_outer
            try:
                cand, rec = solve_eps(grid, u, p, eps, tol=config.tol, max_outer=cap)
            except ConvergenceError as exc:
                if prev is None or depth >= config.max_insertions:
                    err = ConvergenceError(
                        f"continuation failed at eps = {eps:.4g}: {exc}", exc.residual
                    )
                    err.trace = trace
                    raise err from exc
                mid = math.sqrt(prev * eps)
                log.info("eps %.4g failed; inserting %.4g", eps, mid)
                stack.append((mid, True))
                depth += 1
                continue
            rec.inserted = inserted
            trace.records.append(rec)
            log.info(
                "eps %.4g: %d its, c_eps %.8g, residual %.2e",
                eps, rec.iterations, rec.c_eps, rec.residual,
            )
            u = cand
            prev = eps
            stack.pop()
    if np.any(trace.levels <= 0.0):
        err = TrivialSolutionError("nonpositive mountain-pass level in the trace")
        err.trace = trace
        raise err
    if trace.level_spread > config.level_spread_tol:
        err = SolverError(
            f"levels c_eps spread by {trace.level_spread:.3f} > {config.level_spread_tol}"
        )
        err.trace = trace
        raise err
    return u, trace


def limit_energy_gap(grid: Grid, u: np.ndarray, p: float, c_eps: float) -> float:
    """Relative gap ``|J(u) - c_eps| / c_eps`` between limit energy and level."""
    return abs(energy_J(grid, u, p) - c_eps) / abs(c_eps)
