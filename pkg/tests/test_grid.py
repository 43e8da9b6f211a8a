import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plasmafb.errors import ConfigurationError, DimensionError, RangeError
from plasmafb.grid import (
    BOUNDARY,
    EXTERIOR,
    INTERIOR,
    boundary_flux,
    build_grid,
    dirichlet_energy,
    dirichlet_form,
    dirichlet_solve,
    grad,
    grad_sq,
    integrate,
    laplacian,
    sample,
)

from conftest import random_field


def full_neighbours(grid):
    m = grid.interior
    ok = np.zeros_like(m)
    ok[1:-1, 1:-1] = m[2:, 1:-1] & m[:-2, 1:-1] & m[1:-1, 2:] & m[1:-1, :-2]
    return m & ok


class TestBuild:
    def test_square_counts(self):
        g = build_grid("square", 1.0, 65)
        assert g.n_interior == 63**2
        assert g.h == pytest.approx(1.0 / 64)
        assert g.cell_area == pytest.approx(g.h**2)

    def test_disk_fraction(self, disk129):
        # lattice nodes with |x| < 1, counted before building
        X, Y = disk129.coords
        oracle = np.count_nonzero(np.hypot(X, Y) < 1.0) / 129**2
        assert oracle == pytest.approx(np.pi / 4, rel=0.02)
        # nodes of the discrete domain (interior and Dirichlet rim)
        live = np.count_nonzero(disk129.mask != EXTERIOR) / 129**2
        assert live == pytest.approx(np.pi / 4, rel=0.02)
        # the interior alone fills the disk of radius R - h/2 at density 1/h^2
        expected = np.pi * (1.0 - disk129.h / 2) ** 2 / disk129.h**2
        assert disk129.n_interior == pytest.approx(expected, rel=0.01)

    def test_disk_mask_rule(self, disk129):
        X, Y = disk129.coords
        inside = np.hypot(X, Y) < 1.0 - disk129.h / 2
        assert np.array_equal(disk129.interior, inside)

    @pytest.mark.parametrize("shape", ["square", "disk"])
    def test_interior_neighbours_are_live(self, shape):
        g = build_grid(shape, 1.0, 65)
        I, J = np.nonzero(g.interior)
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            assert np.all(g.mask[I + di, J + dj] != EXTERIOR)
        # boundary nodes are exactly the non-interior neighbours of interior nodes
        assert set(np.unique(g.mask)) <= {EXTERIOR, BOUNDARY, INTERIOR}

    @pytest.mark.parametrize("n", [4, 64, 66, 63])
    def test_bad_n(self, n):
        with pytest.raises(ConfigurationError):
            build_grid("disk", 1.0, n)

    def test_bad_shape_and_extent(self):
        with pytest.raises(ConfigurationError):
            build_grid("annulus", 1.0, 65)
        with pytest.raises(ConfigurationError):
            build_grid("disk", 0.0, 65)

    def test_dimension_error(self, disk129):
        with pytest.raises(DimensionError):
            laplacian(disk129, np.zeros((65, 65)))


class TestLaplacian:
    def test_linear_in_kernel(self, disk129):
        X, _ = disk129.coords
        u = np.where(disk129.interior, X, 0.0)
        lap = laplacian(disk129, u)
        sel = full_neighbours(disk129)
        assert np.abs(lap[sel]).max() < 1e-9

    def test_quadratic_exact(self, disk129):
        X, Y = disk129.coords
        u = np.where(disk129.interior, X**2 + Y**2, 0.0)
        lap = laplacian(disk129, u)
        sel = full_neighbours(disk129)
        np.testing.assert_allclose(lap[sel], 4.0, rtol=0, atol=1e-8)
        assert np.all(lap[~disk129.interior] == 0.0)

    def test_matches_loop_oracle(self, square65):
        g = square65
        u = random_field(g, np.random.default_rng(0))
        ref = np.zeros_like(u)
        for i in range(g.n):
            for j in range(g.n):
                if g.interior[i, j]:
                    ref[i, j] = (u[i + 1, j] + u[i - 1, j] + u[i, j + 1] + u[i, j - 1]
                                 - 4 * u[i, j]) / g.h**2
        np.testing.assert_allclose(laplacian(g, u), ref, rtol=1e-13, atol=1e-9)

    def test_matches_sparse_operator(self, disk129):
        u = random_field(disk129, np.random.default_rng(1))
        lhs = -laplacian(disk129, u)[disk129.interior]
        rhs = disk129.neg_laplacian @ disk129.restrict(u)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-8)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_symmetric(self, seed):
        g = build_grid("disk", 1.0, 65)
        rng = np.random.default_rng(seed)
        u, v = random_field(g, rng), random_field(g, rng)
        a = integrate(g, u * laplacian(g, v))
        b = integrate(g, v * laplacian(g, u))
        assert abs(a - b) <= 1e-12 * max(abs(a), abs(b))


class TestGradient:
    def test_linear_fields(self, disk129):
        X, Y = disk129.coords
        u = np.where(disk129.interior, X + 2 * Y, 0.0)
        sel = full_neighbours(disk129)
        np.testing.assert_allclose(grad_sq(disk129, u)[sel], 5.0, rtol=1e-10)
        u = np.where(disk129.interior, X, 0.0)
        np.testing.assert_allclose(grad_sq(disk129, u)[sel], 1.0, rtol=1e-10)

    def test_zero(self, disk129):
        assert np.all(grad_sq(disk129, disk129.zeros()) == 0.0)

    def test_one_sided_at_boundary(self, square65):
        # u = x(1-x) vanishes on the two vertical sides; at the boundary nodes
        # one-sided inward differences give the rim slope to O(h)
        g = square65
        X, Y = g.coords
        u = np.where(g.mask > 0, X * (1 - X), 0.0)
        gx, _ = grad(g, u)
        mid = g.n // 2
        assert gx[0, mid] == pytest.approx(1.0, abs=2 * g.h)
        assert gx[-1, mid] == pytest.approx(-1.0, abs=2 * g.h)


class TestIntegrals:
    def test_unit_square(self):
        g = build_grid("square", 1.0, 129)
        assert integrate(g, np.ones((g.n, g.n))) == pytest.approx((g.n - 2) ** 2 * g.h**2)
        assert integrate(g, np.ones((g.n, g.n))) == pytest.approx(1.0, abs=4 * g.h)

    def test_unit_disk(self, disk129):
        assert integrate(disk129, np.ones((129, 129))) == pytest.approx(np.pi, rel=0.02)

    def test_half_square(self):
        g = build_grid("square", 1.0, 129)
        X, _ = g.coords
        assert integrate(g, (X < 0.5).astype(float)) == pytest.approx(0.5, abs=2 * g.h)

    def test_dirichlet_form_is_edge_sum(self, square65):
        g = square65
        rng = np.random.default_rng(2)
        u, v = random_field(g, rng), random_field(g, rng)
        assert dirichlet_form(g, u, v) == pytest.approx(dirichlet_form(g, v, u), rel=1e-12)
        # u^T A u equals the sum of squared edge differences
        dx = np.diff(u, axis=0)
        dy = np.diff(u, axis=1)
        assert dirichlet_energy(g, u) == pytest.approx(float((dx**2).sum() + (dy**2).sum()),
                                                      rel=1e-12)

    def test_poincare(self, disk129):
        u = random_field(disk129, np.random.default_rng(3))
        lam = integrate(disk129, grad_sq(disk129, u)) / integrate(disk129, u * u)
        assert lam > 0


class TestFlux:
    def test_zero(self, disk129):
        assert boundary_flux(disk129, disk129.zeros()) == 0.0

    def test_square_slope(self):
        # u = s * dist(x, boundary) has inward slope s on every side
        g = build_grid("square", 1.0, 129)
        s = 0.7
        u = s * g.boundary_distance
        u[~g.interior] = 0.0
        flux = boundary_flux(g, u)
        assert flux == pytest.approx(-4 * s * (g.n - 2) * g.h, rel=1e-12)
        assert flux == pytest.approx(-4 * s * 1.0, abs=8 * s * g.h)

    def test_disk_divergence(self, disk129):
        phi = dirichlet_solve(disk129, np.ones((129, 129)))
        flux = boundary_flux(disk129, phi)
        assert flux == pytest.approx(-integrate(disk129, np.ones((129, 129))), rel=1e-8)
        assert flux == pytest.approx(-np.pi, rel=0.02)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_discrete_divergence(self, seed):
        g = build_grid("disk", 1.0, 65)
        u = random_field(g, np.random.default_rng(seed))
        a = boundary_flux(g, u)
        b = integrate(g, laplacian(g, u))
        assert a == pytest.approx(b, rel=1e-10, abs=1e-10 * np.abs(u).sum())


class TestDirichletSolve:
    def test_disk_unit_rhs(self, disk129):
        phi = dirichlet_solve(disk129, np.ones((129, 129)))
        c = 129 // 2
        assert phi[c, c] == pytest.approx(0.25, abs=4 * disk129.h)
        assert np.all(phi[~disk129.interior] == 0.0)

    def test_linearity(self, disk129):
        X, Y = disk129.coords
        phi = dirichlet_solve(disk129, np.full((129, 129), 4.0))
        exact = np.where(disk129.interior, 1 - X**2 - Y**2, 0.0)
        assert np.abs(phi - exact).max() < 2 * disk129.h

    def test_second_order_at_center(self):
        errs = []
        for n in (65, 129, 257):
            g = build_grid("square", 1.0, n)
            X, Y = g.coords
            rhs = 2 * np.pi**2 * np.sin(np.pi * X) * np.sin(np.pi * Y)
            phi = dirichlet_solve(g, rhs)
            errs.append(abs(phi[n // 2, n // 2] - 1.0))
        assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5

    def test_zero_rhs(self, disk129):
        assert np.all(dirichlet_solve(disk129, disk129.zeros()) == 0.0)

    def test_residual_and_max_principle(self, disk129):
        rng = np.random.default_rng(4)
        rhs = np.abs(random_field(disk129, rng))
        phi = dirichlet_solve(disk129, rhs)
        res = -laplacian(disk129, phi) - rhs
        assert np.linalg.norm(res[disk129.interior]) <= 1e-9 * np.linalg.norm(rhs)
        assert phi.min() >= 0.0


class TestSample:
    def test_nodes_exact(self, disk129):
        u = random_field(disk129, np.random.default_rng(5))
        X, Y = disk129.coords
        idx = [(64, 64), (10, 70), (100, 30)]
        for i, j in idx:
            assert sample(disk129, u, [X[i, j], Y[i, j]]) == u[i, j]

    def test_linear_cell_centre(self, square65):
        g = square65
        X, Y = g.coords
        u = 3 * X - 2 * Y + 1
        pts = np.array([[0.3 + g.h / 2, 0.4 + g.h / 2], [0.71, 0.13]])
        np.testing.assert_allclose(sample(g, u, pts), 3 * pts[:, 0] - 2 * pts[:, 1] + 1,
                                   rtol=1e-12)

    def test_independent_reimplementation(self, disk129):
        from scipy.interpolate import RegularGridInterpolator

        rng = np.random.default_rng(6)
        u = random_field(disk129, rng)
        pts = rng.uniform(-1, 1, size=(200, 2))
        ref = RegularGridInterpolator((disk129.axis, disk129.axis), u)(pts)
        np.testing.assert_allclose(sample(disk129, u, pts), ref, rtol=1e-12, atol=1e-12)

    def test_outside(self, disk129):
        with pytest.raises(RangeError):
            sample(disk129, disk129.zeros(), [1.5, 0.0])
