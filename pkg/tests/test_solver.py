import numpy as np
import pytest

from plasmafb.config import ProblemConfig
from plasmafb.errors import ConfigurationError, ConvergenceError, PreconditionError
from plasmafb.functional import domain_variation_residual, energy_J, energy_Jeps, residual_eps
from plasmafb.grid import build_grid, dirichlet_solve, grad_sq
from plasmafb.nehari import nehari_residual
from plasmafb.oracle import radial_oracle
from plasmafb.solver import (
    ContinuationSchedule,
    barrier_check,
    continuation_solve,
    energy_identity_check,
    initial_guess,
    limit_energy_gap,
    lipschitz_estimate,
    ray_maximize,
    solve_eps,
)
from plasmafb.verify import _c1_norm, variation_fields

# frozen regression baseline: disk n=129, p=4, eps=0.1, tol=1e-8 from the initial cap
C_EPS_BASELINE = 32.26618746301707


class TestSchedule:
    def test_levels(self):
        s = ContinuationSchedule(0.2, 0.5, 0.03)
        assert s.levels() == pytest.approx([0.2, 0.1, 0.05, 0.03])

    def test_invalid(self):
        with pytest.raises(ConfigurationError):
            ContinuationSchedule(0.2, 1.0, 0.01)
        with pytest.raises(ConfigurationError):
            ContinuationSchedule(0.01, 0.5, 0.02)

    def test_floor_below_2h(self):
        with pytest.raises(ConfigurationError):
            ProblemConfig(n=129, eps_min=0.01).schedule()

    def test_default_floor(self):
        cfg = ProblemConfig(n=257)
        assert cfg.schedule().eps_min == pytest.approx(4 * cfg.h)
        cfg = ProblemConfig(n=257, eps_min_cells=2.0)
        assert cfg.schedule().eps_min == pytest.approx(max(2 * cfg.h, 0.003))


class TestInitialGuess:
    def test_cap(self, disk129):
        u0 = initial_guess(disk129)
        assert u0[64, 64] == 3.0
        assert np.all(u0[~disk129.interior] == 0.0)
        assert np.all(u0[disk129.boundary_distance < 0.49] == 0.0)
        assert np.isfinite(nehari_residual(disk129, u0, 4.0))


class TestRayMaximize:
    def test_ray_maximum(self, disk129):
        u0 = initial_guess(disk129)
        u, s = ray_maximize(disk129, u0, 4.0, 0.1)
        e = energy_Jeps(disk129, u, 4.0, 0.1)
        for t in (0.98, 1.02):
            v = np.minimum(u, 1.0) + t * np.maximum(u - 1.0, 0.0)
            assert energy_Jeps(disk129, v, 4.0, 0.1) <= e


class TestSolveEps:
    @pytest.fixture(scope="class")
    @staticmethod
    def solved(disk129):
        return solve_eps(disk129, initial_guess(disk129), 4.0, 0.1, tol=1e-8)

    def test_baseline(self, disk129, solved):
        u, rec = solved
        assert rec.residual <= 1e-8
        assert np.abs(residual_eps(disk129, u, 4.0, 0.1)).max() <= 1e-8
        assert rec.c_eps > 0
        assert rec.c_eps == pytest.approx(C_EPS_BASELINE, rel=1e-8)

    def test_fixed_point(self, disk129, solved):
        u, _ = solved
        u2, rec = solve_eps(disk129, u, 4.0, 0.1, tol=1e-8)
        assert rec.iterations == 0
        assert np.array_equal(u, u2)

    def test_energy_not_above_start(self, disk129, solved):
        u, rec = solved
        start, _ = ray_maximize(disk129, initial_guess(disk129), 4.0, 0.1)
        assert rec.c_eps <= energy_Jeps(disk129, start, 4.0, 0.1)

    def test_eps_floor(self, disk129):
        with pytest.raises(PreconditionError):
            solve_eps(disk129, initial_guess(disk129), 4.0, 1.5 * disk129.h)

    def test_no_plus_set(self, disk129):
        with pytest.raises(PreconditionError):
            solve_eps(disk129, disk129.zeros(), 4.0, 0.1)

    def test_iteration_cap(self, disk129):
        with pytest.raises(ConvergenceError) as info:
            solve_eps(disk129, initial_guess(disk129), 4.0, 0.1, tol=1e-8, max_outer=1)
        assert info.value.residual > 1e-8


class TestContinuation:
    def test_trace(self, solved129):
        grid, u, trace, cfg = solved129
        assert np.all(trace.levels > 0)
        assert all(r.residual <= cfg.tol for r in trace.records)
        assert trace.records[-1].eps == pytest.approx(cfg.schedule(grid.h).eps_min)
        assert trace.level_spread <= 0.2
        assert nehari_residual(grid, u, cfg.p) <= 1e-3
        assert u.max() > 1.0

    def test_limit_energy(self, solved129):
        grid, u, trace, cfg = solved129
        assert limit_energy_gap(grid, u, cfg.p, trace.records[-1].c_eps) <= 0.05

    def test_plus_set_containment(self, solved129):
        grid, u, trace, _ = solved129
        assert all(r.delta0 >= 4 * grid.h for r in trace.records)

    def test_barrier_bound(self, solved129):
        grid, u, trace, cfg = solved129
        a0 = float(np.maximum(u - 1, 0).max() ** (cfg.p - 1))
        phi0 = dirichlet_solve(grid, np.full(u.shape, a0))
        assert u.max() <= phi0.max() + 10 * grid.h
        assert all(r.barrier_violation <= 10 * grid.h for r in trace.records)

    def test_deterministic(self, solved129):
        grid, u, trace, cfg = solved129
        u2, trace2 = continuation_solve(cfg, grid)
        assert np.array_equal(u, u2)
        assert trace.rows() == trace2.rows()

    def test_domain_variation(self, solved129):
        grid, u, _, cfg = solved129
        for phi in variation_fields(grid):
            val = domain_variation_residual(grid, u, cfg.p, phi, "limit")
            assert abs(val) <= 0.05 * _c1_norm(grid, phi)

    def test_domain_variation_eps_mode(self, disk129):
        u, _ = solve_eps(disk129, initial_guess(disk129), 4.0, 0.1, tol=1e-10)
        for phi in variation_fields(disk129):
            val = domain_variation_residual(disk129, u, 4.0, phi, "eps", 0.1)
            assert abs(val) <= 0.05 * _c1_norm(disk129, phi)

    def test_partial_trace_on_failure(self):
        cfg = ProblemConfig(n=129, max_outer=1)
        with pytest.raises(ConvergenceError) as info:
            continuation_solve(cfg)
        assert info.value.trace.records == []


class TestMonitors:
    def test_barrier(self, disk129):
        assert barrier_check(disk129, disk129.zeros(), 4.0) <= 0.0
        phi = dirichlet_solve(disk129, np.full((129, 129), 2.0))
        assert phi.min() >= 0.0

    def test_lipschitz(self, disk129):
        phi = dirichlet_solve(disk129, np.ones((129, 129)))
        L, table = lipschitz_estimate(disk129, phi)
        # the staircase rim has reentrant corners whose gradient excess
        # (about 0.07 to 0.09) does not shrink with h
        assert 0.5 <= L <= 0.6
        assert lipschitz_estimate(disk129, disk129.zeros())[0] == 0.0
        rs = [r for r, _ in table]
        assert rs[0] == pytest.approx(4 * disk129.h) and np.all(np.diff(rs) > 0)

    def test_energy_identity_zero(self, disk129):
        assert energy_identity_check(disk129, disk129.zeros(), 4.0) == 0.0

    def test_energy_identity_oracle_field(self):
        prof = radial_oracle(4.0)
        errs = []
        for n in (129, 257):
            g = build_grid("disk", 1.0, n)
            X, Y = g.coords
            # boundary nodes carry the smooth extension of the profile
            u = np.where(g.mask != 0, prof(np.hypot(X, Y)), 0.0)
            errs.append(energy_identity_check(g, u, 4.0))
        assert errs[0] <= 2.0 / 128
        assert errs[1] <= 2.0 / 256
        assert errs[1] < errs[0]

    def test_lipschitz_refinement(self, solved129, solved257):
        L129 = solved129[2].records[-1].lipschitz
        L257 = solved257[2].records[-1].lipschitz
        assert abs(L257 - L129) <= 0.1 * L257
