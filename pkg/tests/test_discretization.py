import numpy as np
import pytest

from src.discretization import (BoundaryKind, BoundarySpec, Tridiagonal, apply_laplacian, build_implicit_system,
                                thomas_solve)
from src.errors import DomainError, ShapeMismatchError, SingularSystemError
from src.model import Grid
from src.oracles import dense_solve
from src.schema import Parameters


@pytest.fixture
def unit_grid():
    """Three nodes with dx = 1."""
    return Grid(H=2.0, M=3)


class TestBoundarySpec:
    def test_field_boundaries(self, params):
        assert BoundarySpec.nutrient(params).pinned
        assert BoundarySpec.nutrient(params).dirichlet_value == params.n_H
        assert not BoundarySpec.phytoplankton().pinned

    def test_rejects_negative_boundary_value(self):
        with pytest.raises(DomainError):
            BoundarySpec(BoundaryKind.NEUMANN_DIRICHLET, -1.0)


class TestLaplacian:
    def test_constant_is_harmonic(self, grid):
        for bc in (BoundarySpec.phytoplankton(), BoundarySpec(BoundaryKind.NEUMANN_DIRICHLET, 3.0)):
            np.testing.assert_array_equal(apply_laplacian(np.full(grid.M, 3.0), bc, grid), 0.0)

    def test_quadratic_with_zero_slope_at_the_surface(self, grid):
        lap = apply_laplacian(grid.nodes ** 2, BoundarySpec(BoundaryKind.NEUMANN_DIRICHLET, 1.0), grid)
        np.testing.assert_allclose(lap[:-1], 2.0, rtol=1e-9)
        assert lap[-1] == 0.0

    @pytest.mark.parametrize("k", [1, 2, 5])
    def test_cosine_modes_are_discrete_eigenvectors(self, grid, k):
        q = k * np.pi / grid.H
        u = np.cos(q * grid.nodes)
        eigenvalue = 2.0 * (np.cos(q * grid.dx) - 1.0) / grid.dx ** 2
        np.testing.assert_allclose(apply_laplacian(u, BoundarySpec.phytoplankton(), grid), eigenvalue * u,
                                   atol=1e-9)

    def test_mixed_eigenfunction(self, params):
        grid = Grid(H=1.0, M=201)
        u = params.n_H + np.cos(0.5 * np.pi * grid.nodes)
        lap = apply_laplacian(u, BoundarySpec.nutrient(params), grid)
        expected = -(0.5 * np.pi) ** 2 * np.cos(0.5 * np.pi * grid.nodes)
        assert np.abs(lap[:-1] - expected[:-1]).max() <= 1e-3
        assert lap[-1] == 0.0

    def test_linearity(self, grid, params, rng):
        for bc in (BoundarySpec.nutrient(params), BoundarySpec.phytoplankton()):
            u, v = rng.normal(size=grid.M), rng.normal(size=grid.M)
            alpha, beta = rng.normal(size=2)
            np.testing.assert_allclose(apply_laplacian(alpha * u + beta * v, bc, grid),
                                       alpha * apply_laplacian(u, bc, grid) + beta * apply_laplacian(v, bc, grid),
                                       rtol=1e-12, atol=1e-9)

    def test_neumann_operator_is_symmetric_under_trapezoid_weights(self, grid, rng):
        bc = BoundarySpec.phytoplankton()
        for _ in range(10):
            u, v = rng.normal(size=grid.M), rng.normal(size=grid.M)
            lhs = grid.weights @ (apply_laplacian(u, bc, grid) * v)
            rhs = grid.weights @ (u * apply_laplacian(v, bc, grid))
            assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)


class TestImplicitSystem:
    def test_neumann_rows(self, unit_grid):
        sys = build_implicit_system(BoundarySpec.phytoplankton(), unit_grid, Parameters(H=2.0), dt=1.0)
        np.testing.assert_array_equal(sys.to_dense(), [[3.0, -2.0, 0.0], [-1.0, 3.0, -1.0], [0.0, -2.0, 3.0]])
        np.testing.assert_allclose(thomas_solve(sys, np.ones(3)), np.ones(3))

    def test_decay_enters_the_diagonal(self, unit_grid):
        sys = build_implicit_system(BoundarySpec.phytoplankton(), unit_grid, Parameters(H=2.0), dt=1.0, decay=0.5)
        np.testing.assert_array_equal(sys.diag, 3.5)

    def test_dirichlet_row_is_pinned(self, unit_grid):
        params = Parameters(H=2.0, n_H=1.0)
        sys = build_implicit_system(BoundarySpec.nutrient(params), unit_grid, params, dt=1.0)
        np.testing.assert_array_equal(sys.to_dense()[-1], [0.0, 0.0, 1.0])
        np.testing.assert_allclose(thomas_solve(sys, np.zeros(3)), [2.0 / 7.0, 3.0 / 7.0, 1.0])

    def test_rejects_bad_step_or_decay(self, grid, params):
        with pytest.raises(DomainError):
            build_implicit_system(BoundarySpec.phytoplankton(), grid, params, dt=0.0)
        with pytest.raises(DomainError):
            build_implicit_system(BoundarySpec.phytoplankton(), grid, params, dt=0.1, decay=-1.0)

    @pytest.mark.parametrize("dt", [1e-4, 1e-2, 10.0])
    def test_matrices_are_diagonally_dominant(self, grid, params, dt):
        for bc in (BoundarySpec.nutrient(params), BoundarySpec.phytoplankton()):
            assert build_implicit_system(bc, grid, params, dt, decay=params.m_p).is_diagonally_dominant()

    def test_discrete_maximum_principle(self, grid, params, rng):
        """Nonnegative data stay nonnegative through the implicit solve."""
        for bc in (BoundarySpec.nutrient(params), BoundarySpec.phytoplankton()):
            sys = build_implicit_system(bc, grid, params, dt=0.5)
            for _ in range(20):
                x = thomas_solve(sys, rng.uniform(0.0, 1.0, grid.M) * (rng.uniform(size=grid.M) < 0.3))
                assert x.min() >= 0.0


class TestThomas:
    def test_matches_dense_solver(self, rng):
        m = 40
        lower, upper = rng.uniform(-1, 1, m - 1), rng.uniform(-1, 1, m - 1)
        diag = 2.5 + rng.uniform(0, 1, m)
        sys = Tridiagonal(lower, diag, upper)
        rhs = rng.normal(size=m)
        np.testing.assert_allclose(thomas_solve(sys, rhs), dense_solve(sys.to_dense(), rhs), rtol=1e-10)

    def test_matvec_matches_dense_product(self, rng):
        sys = Tridiagonal(rng.normal(size=5), rng.normal(size=6), rng.normal(size=5))
        x = rng.normal(size=6)
        np.testing.assert_allclose(sys.matvec(x), sys.to_dense() @ x)

    def test_zero_pivot(self):
        sys = Tridiagonal(np.array([1.0]), np.array([0.0, 1.0]), np.array([1.0]))
        with pytest.raises(SingularSystemError):
            thomas_solve(sys, np.ones(2))

    def test_shape_checks(self):
        with pytest.raises(ShapeMismatchError):
            Tridiagonal(np.ones(3), np.ones(3), np.ones(2))
        sys = Tridiagonal(np.ones(2), np.full(3, 4.0), np.ones(2))
        with pytest.raises(ShapeMismatchError):
            thomas_solve(sys, np.ones(4))
