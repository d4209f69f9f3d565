"""
End-to-end properties of the column model at desk scale: discretization
order, positivity and the nutrient bound, extinction, equilibria, scheme
agreement, the functional-response bound, the tridiagonal solver and the
budget residual under refinement.
"""
import itertools

import numpy as np
import pytest

from src.analysis import check_n_bound, check_positivity, fit_extinction, fit_zoo_decay, run_checks, steady_residual
from src.discretization import Tridiagonal, thomas_solve
from src.model import Grid, State, eval_g, translation_lambda
from src.oracles import convergence_order, dense_solve, heat_exact_mixed, heat_exact_neumann, richardson_extrapolate
from src.schema import FunctionalResponse, LightModel, Parameters, Scheme, SolverConfig
from src.timestepper import ColumnStepper, cfl_max_dt, integrate

LIGHT = LightModel.EXPONENTIAL_DECAY
KIND = FunctionalResponse.HOLLING_II


def final_state(state0, params, grid, dt, t_end, scheme=Scheme.IMEX_EULER, light=LIGHT, kind=KIND):
    config = SolverConfig(dt=dt, t_end=t_end, scheme=scheme, snapshot_every=10 ** 9)
    return integrate(state0, params, light, kind, grid, config).final


def time_extrapolated(state0, params, grid, dt, t_end):
    coarse = final_state(state0, params, grid, dt, t_end)
    fine = final_state(state0, params, grid, 0.5 * dt, t_end)
    return richardson_extrapolate(coarse.n, fine.n), richardson_extrapolate(coarse.p, fine.p)


class TestSpatialConvergence:
    """Second order in space against eigenfunction series; first-order time error is extrapolated away."""

    T_END = 0.1
    DT = 2.5e-4
    SIZES = (51, 101, 201)

    def test_mixed_nutrient_problem(self):
        params = Parameters(r=0.0, n_H=1.0)
        errors = []
        for M in self.SIZES:
            grid = Grid(H=1.0, M=M)
            state0 = State(heat_exact_mixed([0.8], 0.0, grid, params.n_H), np.zeros(M), 0.0)
            n, _ = time_extrapolated(state0, params, grid, self.DT, self.T_END)
            exact = heat_exact_mixed([0.8], self.T_END, grid, params.n_H, D=params.D)
            errors.append((grid.dx, np.abs(n - exact).max()))
        assert convergence_order(errors) == pytest.approx(2.0, abs=0.2)

    def test_neumann_phytoplankton_problem(self):
        params = Parameters(r=0.0, m_p=0.2)
        coeffs = [1.0, 0.5]
        errors = []
        for M in self.SIZES:
            grid = Grid(H=1.0, M=M)
            state0 = State(np.full(M, params.n_H), heat_exact_neumann(coeffs, 0.0, grid), 0.0)
            _, p = time_extrapolated(state0, params, grid, self.DT, self.T_END)
            exact = heat_exact_neumann(coeffs, self.T_END, grid, D=params.D, decay=params.m_p)
            errors.append((grid.dx, np.abs(p - exact).max()))
        assert convergence_order(errors) == pytest.approx(2.0, abs=0.2)


RANDOM_CASES = [(light, kind, seed)
                for light, kind in itertools.product(LightModel, FunctionalResponse)
                for seed in range(5)]


@pytest.mark.parametrize("light, kind, seed", RANDOM_CASES)
def test_random_runs_stay_in_the_invariant_region(light, kind, seed):
    """Fifty randomized nonnegative starts: positivity and the nutrient bound."""
    rng = np.random.default_rng(1000 + seed)
    params = Parameters()
    grid = Grid(H=1.0, M=21)
    n0 = rng.uniform(0.0, 2.0, grid.M)
    n0[-1] = params.n_H
    state0 = State(n0, rng.uniform(0.0, 2.0, grid.M), rng.uniform(0.0, 1.0))
    dt = 0.5 * cfl_max_dt(params, grid)
    config = SolverConfig(dt=dt, t_end=400 * dt, snapshot_every=20)
    traj = integrate(state0, params, light, kind, grid, config)
    assert check_positivity(traj, tol=1e-10).passed
    assert check_n_bound(traj, params, tol=1e-8).passed


class TestExtinction:
    def test_phytoplankton_and_zooplankton_die_out(self, extinction_params):
        grid = Grid(H=1.0, M=21)
        h = grid.nodes
        state0 = State(np.full(grid.M, extinction_params.n_H), np.exp(-((h - 0.5) / 0.1) ** 2), 0.1)
        traj = integrate(state0, extinction_params, LIGHT, KIND, grid,
                         SolverConfig(dt=0.01, t_end=40.0, snapshot_every=50))

        fit = fit_extinction(traj, extinction_params)
        assert fit.bound == pytest.approx(-0.5)
        assert fit.rate <= -0.5 * (1.0 - 0.05)
        assert fit.passed
        assert np.abs(traj.final.p).max() < 1e-6

        zoo = fit_zoo_decay(traj, extinction_params)
        assert zoo.rate <= -extinction_params.m * (1.0 - 0.05)
        assert traj.final.z < traj.initial.z * np.exp(-0.09 * 40.0)

        assert all(r.passed for r in run_checks(traj, extinction_params, KIND))

    def test_pure_decay_rate(self, make_smooth):
        params = Parameters(r=0.0, m_p=1.0)
        grid = Grid(H=1.0, M=21)
        state0 = make_smooth(params, grid, z=0.0)
        traj = integrate(state0, params, LIGHT, KIND, grid, SolverConfig(dt=0.01, t_end=5.0))
        assert fit_extinction(traj, params).rate == pytest.approx(-1.0, rel=0.02)


class TestTrivialEquilibrium:
    @pytest.mark.parametrize("light", list(LightModel))
    @pytest.mark.parametrize("kind", list(FunctionalResponse))
    def test_residual_vanishes(self, light, kind, params, grid):
        assert steady_residual(State.trivial(params, grid), params, light, kind, grid) <= 1e-14

    def test_ten_thousand_steps_leave_it_in_place(self, params, grid):
        trivial = State.trivial(params, grid)
        stepper = ColumnStepper(params, LIGHT, KIND, grid, dt=1e-3)
        state = trivial
        for _ in range(10 ** 4):
            state = stepper.imex(state)
        np.testing.assert_allclose(state.n, trivial.n, rtol=0, atol=1e-12)
        np.testing.assert_allclose(state.p, 0.0, rtol=0, atol=1e-12)
        assert abs(state.z) <= 1e-12


class TestSchemeCrossValidation:
    def test_imex_converges_to_rk4_at_first_order(self, params, grid, smooth_state):
        state0 = smooth_state
        gaps = []
        for dt in (1e-3, 5e-4):
            imex = final_state(state0, params, grid, dt, 1.0)
            rk4 = final_state(state0, params, grid, dt, 1.0, scheme=Scheme.EXPLICIT_RK4)
            gaps.append(max(np.abs(imex.n - rk4.n).max(), np.abs(imex.p - rk4.p).max(), abs(imex.z - rk4.z)))
        assert gaps[0] / gaps[1] >= 1.8
        assert gaps[1] <= 1e-3


@pytest.mark.parametrize("kind", list(FunctionalResponse))
@pytest.mark.parametrize("m", [1.0, 5.0, 20.0])
def test_translation_keeps_the_response_below_a_linear_bound(kind, m):
    p = np.linspace(0.0, m, 10 ** 4)
    assert (translation_lambda(kind, m) * p - eval_g(kind, p)).min() >= -1e-12


def test_thomas_matches_dense_elimination():
    rng = np.random.default_rng(7)
    for _ in range(100):
        M = int(rng.integers(3, 201))
        lower, upper = rng.uniform(-1.0, 1.0, M - 1), rng.uniform(-1.0, 1.0, M - 1)
        off = np.zeros(M)
        off[1:] += np.abs(lower)
        off[:-1] += np.abs(upper)
        diag = (off + rng.uniform(0.1, 1.0, M)) * rng.choice([-1.0, 1.0], M)
        sys = Tridiagonal(lower, diag, upper)
        rhs = rng.normal(size=M)
        expected = dense_solve(sys.to_dense(), rhs)
        error = np.abs(thomas_solve(sys, rhs) - expected).max() / np.abs(expected).max()
        assert error <= 1e-10


def test_budget_residual_shrinks_under_refinement(params, make_smooth):
    """(dt, dx) -> (dt/2, dx/2) across three levels."""
    levels = []
    for level in range(3):
        grid = Grid(H=1.0, M=20 * 2 ** level + 1)
        dt = 0.01 / 2 ** level
        config = SolverConfig(dt=dt, t_end=0.5, snapshot_every=10 * 2 ** level)
        traj = integrate(make_smooth(params, grid), params, LIGHT, KIND, grid, config)
        levels.append(np.abs(traj.column("flux_residual")[1:]).max())
    for coarse, fine in zip(levels, levels[1:]):
        assert fine <= 1.1 * coarse
    assert levels[-1] < levels[0]
