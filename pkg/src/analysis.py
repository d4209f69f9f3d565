"""
Invariant checks on trajectories and the steady-state solver.

The checks turn the positivity, invariant-region, growth and extinction
properties of the column model into pass/fail reports; `find_steady` looks
for equilibria of the discretized system with a damped Newton iteration.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from scipy.stats import linregress

from src.discretization import BoundarySpec, apply_laplacian
from src.errors import DomainError, ExtinctWindowError, PreconditionError, SingularityError
from src.model import (NEGATIVE_TOL, Grid, State, extinction_threshold_holds, max_growth_rate,
                       reaction_rhs, response_field)
from src.schema import DecayFit, FunctionalResponse, InvariantReport, LightModel, Parameters
from src.timestepper import Trajectory

# Relative slack on fitted decay rates.
RATE_SLACK = 0.05

MAX_HALVINGS = 30


def check_positivity(traj: Trajectory, tol: float = 1e-10) -> InvariantReport:
    """All of n, p and z stay above -tol at every snapshot."""
    if not len(traj):
        raise PreconditionError("empty trajectory")
    worst, node, time = np.inf, None, None
    for s in traj.snapshots:
        for value, j in ((s.n.min(), int(np.argmin(s.n))), (s.p.min(), int(np.argmin(s.p))), (s.z, None)):
            if value < worst:
                worst, node, time = float(value), j, s.t
    return InvariantReport(name="POSITIVITY", passed=worst >= -tol, worst=worst, node=node, time=time,
                           tolerance=tol)


def check_n_bound(traj: Trajectory, params: Parameters, tol: float = 1e-8) -> InvariantReport:
    """n never exceeds max{n_H, max n0}; `worst` is the largest excess over that bound."""
    if not len(traj):
        raise PreconditionError("empty trajectory")
    bound = max(params.n_H, float(traj.initial.n.max()))
    worst, node, time = -np.inf, None, None
    for s in traj.snapshots:
        j = int(np.argmax(s.n))
        excess = float(s.n[j]) - bound
        if excess > worst:
            worst, node, time = excess, j, s.t
    return InvariantReport(name="N_BOUND", passed=worst <= tol, worst=worst, node=node, time=time,
                           tolerance=tol)


def _intakes(traj: Trajectory, params: Parameters, kind: FunctionalResponse, tol: float) -> np.ndarray:
    grid = traj.grid
    return np.array([params.k / params.H * grid.integrate(response_field(kind, s.p, tol))
                     for s in traj.snapshots])


def check_z_inequality(traj: Trajectory, params: Parameters, kind: FunctionalResponse,
                       grid: Optional[Grid] = None, tol: float = NEGATIVE_TOL) -> InvariantReport:
    """
    Forward differences of z obey z' <= z*((k/H)*int g(p) - m) up to a first
    order slack 2*dt*z*((|I| + m)^2 + |dI|/dt), I being the intake.

    `worst` is the largest amount by which a difference quotient exceeds its
    slack-corrected bound, so the check passes when it is <= 0.
    """
    if len(traj) < 2:
        raise PreconditionError("the z inequality needs at least two snapshots")
    if grid is not None and grid != traj.grid:
        raise DomainError("grid does not match the trajectory")

    times = traj.times
    z = np.array([s.z for s in traj.snapshots])
    intake = _intakes(traj, params, kind, tol)

    dt = np.diff(times)
    lhs = np.diff(z) / dt
    rhs = z[:-1] * (intake[:-1] - params.m)
    slack = 2.0 * dt * np.abs(z[:-1]) * ((np.abs(intake[:-1]) + params.m) ** 2
                                         + np.abs(np.diff(intake)) / dt) + 1e-14
    excess = lhs - rhs - slack
    i = int(np.argmax(excess))
    return InvariantReport(name="Z_INEQUALITY", passed=bool(excess[i] <= 0.0), worst=float(excess[i]),
                           time=float(times[i]), tolerance=0.0)


def check_extinction_limit(traj: Trajectory, threshold: float = 1e-6) -> InvariantReport:
    """Final sup norm of p below threshold. Advisory: the limit is only reached on long horizons."""
    final = traj.final
    j = int(np.argmax(np.abs(final.p)))
    worst = float(abs(final.p[j]))
    return InvariantReport(name="P_EXTINCT", passed=worst < threshold, worst=worst, node=j, time=final.t,
                           tolerance=threshold, enforced=False)


def check_linear_contraction(traj: Trajectory, params: Parameters, tol: float = 1e-10) -> InvariantReport:
    """
    Without uptake and zooplankton growth the solution operator is a sup-norm
    contraction: ||n - n_H||, ||p|| and |z| never exceed their initial values.
    """
    z0 = traj.initial.z
    if params.r != 0 or (params.k != 0 and z0 != 0):
        raise PreconditionError("contraction holds only for r = 0 with k = 0 or z0 = 0")
    first = traj.initial
    n_ref = float(np.abs(first.n - params.n_H).max())
    p_ref = float(np.abs(first.p).max())
    worst, time = -np.inf, None
    for s in traj.snapshots:
        excess = max(float(np.abs(s.n - params.n_H).max()) - n_ref,
                     float(np.abs(s.p).max()) - p_ref,
                     abs(s.z) - abs(z0))
        if excess > worst:
            worst, time = excess, s.t
    return InvariantReport(name="LINEAR_CONTRACTION", passed=worst <= tol, worst=worst, time=time,
                           tolerance=tol)


def _window_indices(times: np.ndarray, window: Optional[Tuple[float, float]]) -> np.ndarray:
    if window is None:
        window = (0.5 * times[-1], times[-1])
    start, end = window
    if start > end or start < times[0] or end > times[-1] + 1e-12:
        raise PreconditionError(f"window {window} is outside the trajectory span [{times[0]}, {times[-1]}]")
    idx = np.flatnonzero((times >= start - 1e-12) & (times <= end + 1e-12))
    if idx.size < 2:
        raise PreconditionError(f"window {window} holds fewer than two snapshots")
    return idx


def _fit_log_rate(times: np.ndarray, values: np.ndarray, window, quantity: str, bound: float) -> DecayFit:
    idx = _window_indices(times, window)
    t, v = times[idx], values[idx]
    if (v <= 0).any():
        raise ExtinctWindowError(f"{quantity} is not positive on the whole window")
    fit = linregress(t, np.log(v))
    r_squared = float(np.clip(fit.rvalue ** 2, 0.0, 1.0)) if np.isfinite(fit.rvalue) else 1.0
    passed = fit.slope <= bound + RATE_SLACK * abs(bound)
    return DecayFit(quantity=quantity, rate=float(fit.slope), window_start=float(t[0]),
                    window_end=float(t[-1]), r_squared=r_squared, bound=bound, passed=bool(passed))


def fit_extinction(traj: Trajectory, params: Parameters,
                   window: Optional[Tuple[float, float]] = None) -> DecayFit:
    """
    Exponential decay rate of the phytoplankton column integral, compared with
    r/chi - m_p. The window defaults to the second half of the trajectory.
    """
    if not extinction_threshold_holds(params):
        raise PreconditionError(f"m_p = {params.m_p} does not exceed r/chi = {max_growth_rate(params)}")
    int_p = np.array([traj.grid.integrate(s.p) for s in traj.snapshots])
    bound = max_growth_rate(params) - params.m_p
    return _fit_log_rate(traj.times, int_p, window, "int_p", bound)


def fit_zoo_decay(traj: Trajectory, params: Parameters,
                  window: Optional[Tuple[float, float]] = None) -> DecayFit:
    """
    Exponential decay rate of z, compared with -m. Since z'/z = I - m with the
    intake I >= 0, the bound is only approached once p has died out.
    """
    z = np.array([s.z for s in traj.snapshots])
    return _fit_log_rate(traj.times, z, window, "z", -params.m)


def steady_function(state: State, params: Parameters, light: LightModel, kind: FunctionalResponse,
                    grid: Grid) -> np.ndarray:
    """
    Discretized steady map D*Laplacian + reaction on the unknowns (n without
    its Dirichlet node, p, z).
    """
    dn, dp, dz = reaction_rhs(state, params, light, kind, grid)
    fn = params.D * apply_laplacian(state.n, BoundarySpec.nutrient(params), grid) + dn
    fp = params.D * apply_laplacian(state.p, BoundarySpec.phytoplankton(), grid) + dp
    return np.concatenate([fn[:-1], fp, [dz]])


def steady_residual(state: State, params: Parameters, light: LightModel, kind: FunctionalResponse,
                    grid: Grid) -> float:
    return float(np.abs(steady_function(state, params, light, kind, grid)).max())


def pack(state: State) -> np.ndarray:
    return np.concatenate([state.n[:-1], state.p, [state.z]])


def unpack(x: np.ndarray, params: Parameters, grid: Grid, t: float = 0.0) -> State:
    M = grid.M
    return State(np.append(x[:M - 1], params.n_H), x[M - 1:2 * M - 1], x[-1], t)


def steady_jacobian(state: State, params: Parameters, light: LightModel, kind: FunctionalResponse,
                    grid: Grid) -> np.ndarray:
    """Dense forward-difference Jacobian of `steady_function`."""
    x = pack(state)
    f0 = steady_function(state, params, light, kind, grid)
    jac = np.empty((f0.size, x.size))
    step = np.sqrt(np.finfo(float).eps)
    for k in range(x.size):
        h = step * max(1.0, abs(x[k]))
        xk = x.copy()
        xk[k] += h
        jac[:, k] = (steady_function(unpack(xk, params, grid, state.t), params, light, kind, grid) - f0) / h
    return jac


class SteadyStatus(str, Enum):
    CONVERGED = "converged"
    MAX_ITER = "max_iter"
    SINGULAR_JACOBIAN = "singular_jacobian"
    LEFT_ADMISSIBLE = "left_admissible"
    LINE_SEARCH = "line_search"


@dataclass(frozen=True)
class SteadyResult:
    status: SteadyStatus
    state: State
    residual: float
    iterations: int

    @property
    def converged(self) -> bool:
        return self.status is SteadyStatus.CONVERGED


def find_steady(guess: State, params: Parameters, light: LightModel, kind: FunctionalResponse, grid: Grid,
                tol: float = 1e-10, max_iter: int = 50) -> SteadyResult:
    """
    Damped Newton iteration on the discretized steady system. Each step is
    halved (at most MAX_HALVINGS times) until the residual decreases and the
    trial stays admissible.
    """
    state = unpack(pack(guess), params, grid, guess.t)
    if state.min_value() < -NEGATIVE_TOL:
        raise DomainError("initial guess is not admissible")
    f = steady_function(state, params, light, kind, grid)
    residual = float(np.abs(f).max())

    for it in range(max_iter + 1):
        if residual <= tol:
            logging.info(f"Newton converged in {it} iterations, residual {residual:.3e}")
            return SteadyResult(SteadyStatus.CONVERGED, state, residual, it)
        if it == max_iter:
            break

        jac = steady_jacobian(state, params, light, kind, grid)
        lu, piv = scipy.linalg.lu_factor(jac, check_finite=False)
        if not np.isfinite(lu).all() or (np.abs(np.diag(lu)) == 0.0).any():
            return SteadyResult(SteadyStatus.SINGULAR_JACOBIAN, state, residual, it)
        delta = scipy.linalg.lu_solve((lu, piv), -f)

        x = pack(state)
        scale, accepted, left = 1.0, False, False
        for _ in range(MAX_HALVINGS + 1):
            try:
                trial = unpack(x + scale * delta, params, grid, state.t)
                if trial.min_value() < -NEGATIVE_TOL:
                    raise DomainError(f"trial state has entry {trial.min_value()}")
                f_trial = steady_function(trial, params, light, kind, grid)
            except (SingularityError, DomainError):
                left = True
                scale *= 0.5
                continue
            r_trial = float(np.abs(f_trial).max())
            if r_trial < residual:
                state, f, residual, accepted = trial, f_trial, r_trial, True
                break
            scale *= 0.5

        if not accepted:
            status = SteadyStatus.LEFT_ADMISSIBLE if left else SteadyStatus.LINE_SEARCH
            logging.warning(f"Newton stopped at iteration {it + 1}: {status.value}, residual {residual:.3e}")
            return SteadyResult(status, state, residual, it + 1)
        logging.info(f"Newton iteration {it + 1}: step {scale}, residual {residual:.3e}")

    return SteadyResult(SteadyStatus.MAX_ITER, state, residual, max_iter)


def run_checks(traj: Trajectory, params: Parameters, kind: FunctionalResponse, positivity_tol: float = 1e-10,
               window_start: Optional[float] = None) -> Sequence[InvariantReport]:
    """The report lines of one run, in a fixed order. ZOO_DECAY and P_EXTINCT are advisory."""
    reports = [check_positivity(traj, positivity_tol),
               check_n_bound(traj, params)]
    if len(traj) >= 2:
        reports.append(check_z_inequality(traj, params, kind, tol=max(positivity_tol, NEGATIVE_TOL)))

    t_final = traj.final.t
    window = None if window_start is None else (window_start, t_final)
    if extinction_threshold_holds(params) and traj.grid.integrate(traj.initial.p) > 0 and len(traj) >= 2:
        for name, fit in (("EXTINCTION_RATE", fit_extinction), ("ZOO_DECAY", fit_zoo_decay)):
            if name == "ZOO_DECAY" and traj.initial.z <= 0:
                continue
            try:
                result = fit(traj, params, window)
                reports.append(InvariantReport(name=name, passed=result.passed, worst=result.rate,
                                               time=result.window_end, tolerance=RATE_SLACK,
                                               enforced=name == "EXTINCTION_RATE"))
            except PreconditionError as e:
                logging.warning(f"{name} skipped: {e}")
        reports.append(check_extinction_limit(traj))

    if params.r == 0 and (params.k == 0 or traj.initial.z == 0):
        reports.append(check_linear_contraction(traj, params, max(positivity_tol, 1e-10)))

    for report in reports:
        logging.info(f"{report.name} {'PASS' if report.passed else 'FAIL'} worst={report.worst!r}"
                     f"{'' if report.enforced else ' (advisory)'}")
    return reports
