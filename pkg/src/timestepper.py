"""
Time integration of the column model: an IMEX Euler step (implicit diffusion
and linear decay, explicit reaction), a classical RK4 step for
cross-validation, and the `integrate` driver that records trajectories.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from src.discretization import BoundarySpec, apply_laplacian, build_implicit_system, thomas_solve
from src.errors import (BlowupError, CFLViolationError, PositivityViolationError, SimulationError)
from src.model import NEGATIVE_TOL, Grid, State, reaction_rhs, reaction_terms, response_field
from src.schema import FunctionalResponse, LightModel, Parameters, Scheme, SolverConfig

# Any state entry beyond this magnitude counts as blowup.
BLOWUP_LIMIT = 1e12

TIMESERIES_COLUMNS = ("t", "z", "int_p", "int_gp", "min_n", "max_n", "min_p", "flux_residual")


@dataclass(frozen=True)
class SnapshotDiagnostics:
    t: float
    z: float
    int_p: float
    int_gp: float
    min_n: float
    max_n: float
    min_p: float
    flux_residual: float

    def as_row(self) -> Tuple[float, ...]:
        return tuple(getattr(self, name) for name in TIMESERIES_COLUMNS)


@dataclass
class Trajectory:
    """Time-ordered snapshots with one diagnostics record each."""

    grid: Grid
    snapshots: List[State] = field(default_factory=list)
    diagnostics: List[SnapshotDiagnostics] = field(default_factory=list)
    events: List[Dict] = field(default_factory=list)

    def append(self, state: State, diagnostics: SnapshotDiagnostics):
        if self.snapshots and not state.t > self.snapshots[-1].t:
            raise ValueError(f"snapshot time {state.t} does not follow {self.snapshots[-1].t}")
        self.snapshots.append(state)
        self.diagnostics.append(diagnostics)

    def __len__(self) -> int:
        return len(self.snapshots)

    @property
    def initial(self) -> State:
        return self.snapshots[0]

    @property
    def final(self) -> State:
        return self.snapshots[-1]

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(d, name) for d in self.diagnostics])


def cfl_max_dt(params: Parameters, grid: Grid) -> float:
    """Explicit diffusion stability bound dx^2/(2D)."""
    return grid.dx ** 2 / (2.0 * params.D)


def boundary_gradient(n: np.ndarray, grid: Grid) -> float:
    """Second-order one-sided estimate of dn/dh at h=H."""
    return (3.0 * n[-1] - 4.0 * n[-2] + n[-3]) / (2.0 * grid.dx)


class ColumnStepper:
    """
    Single-step integrators for one (parameters, light, response, grid, dt)
    combination. The implicit matrices are assembled once and reused.
    """

    def __init__(self, params: Parameters, light: LightModel, kind: FunctionalResponse, grid: Grid,
                 dt: float, tol: float = NEGATIVE_TOL):
        self.params = params
        self.light = LightModel(light)
        self.kind = FunctionalResponse(kind)
        self.grid = grid
        self.dt = dt
        self.tol = tol
        self.n_bc = BoundarySpec.nutrient(params)
        self.p_bc = BoundarySpec.phytoplankton()
        self._n_system = None
        self._p_system = None

    @property
    def n_system(self):
        if self._n_system is None:
            self._n_system = build_implicit_system(self.n_bc, self.grid, self.params, self.dt, 0.0)
        return self._n_system

    @property
    def p_system(self):
        if self._p_system is None:
            self._p_system = build_implicit_system(self.p_bc, self.grid, self.params, self.dt, self.params.m_p)
        return self._p_system

    def imex(self, state: State, t_new: Optional[float] = None) -> State:
        dt = self.dt
        uptake, predation, intake = reaction_terms(state, self.params, self.light, self.kind, self.grid, self.tol)

        n_star = state.n - dt * uptake
        p_star = state.p + dt * (uptake - predation)
        z_star = state.z + dt * state.z * intake

        n_new = thomas_solve(self.n_system, n_star)
        p_new = thomas_solve(self.p_system, p_star)
        z_new = z_star / (1.0 + dt * self.params.m)

        t = state.t + dt if t_new is None else t_new
        check_blowup(n_new, p_new, z_new, t)
        return State(n_new, p_new, z_new, t)

    def full_rhs(self, state: State) -> Tuple[np.ndarray, np.ndarray, float]:
        """Semi-discrete right-hand side; zero on the Dirichlet node of n."""
        dn, dp, dz = reaction_rhs(state, self.params, self.light, self.kind, self.grid, self.tol)
        fn = self.params.D * apply_laplacian(state.n, self.n_bc, self.grid) + dn
        fn[-1] = 0.0
        fp = self.params.D * apply_laplacian(state.p, self.p_bc, self.grid) + dp
        return fn, fp, dz

    def rk4(self, state: State, t_new: Optional[float] = None) -> State:
        dt = self.dt
        limit = cfl_max_dt(self.params, self.grid)
        if dt > limit * (1.0 + 1e-12):
            raise CFLViolationError(f"dt={dt} exceeds the explicit stability bound {limit}")

        n0 = np.array(state.n)
        n0[-1] = self.params.n_H
        base = State(n0, state.p, state.z, state.t)

        def shifted(scale, k):
            fields = (base.n + scale * k[0], base.p + scale * k[1], base.z + scale * k[2])
            check_blowup(*fields, base.t)
            return State(*fields, base.t)

        k1 = self.full_rhs(base)
        k2 = self.full_rhs(shifted(0.5 * dt, k1))
        k3 = self.full_rhs(shifted(0.5 * dt, k2))
        k4 = self.full_rhs(shifted(dt, k3))

        incr = [(a + 2.0 * b + 2.0 * c + d) / 6.0 for a, b, c, d in zip(k1, k2, k3, k4)]
        fields = (base.n + dt * incr[0], base.p + dt * incr[1], base.z + dt * incr[2])
        t = state.t + dt if t_new is None else t_new
        check_blowup(*fields, t)
        return State(*fields, t)

    def step(self, scheme: Scheme, state: State, t_new: Optional[float] = None) -> State:
        if Scheme(scheme) is Scheme.EXPLICIT_RK4:
            return self.rk4(state, t_new)
        return self.imex(state, t_new)


def check_blowup(n: np.ndarray, p: np.ndarray, z: float, t: float):
    """Raise BlowupError on nonfinite or oversized step results, before they become a State."""
    if not (np.isfinite(n).all() and np.isfinite(p).all() and np.isfinite(z)):
        raise BlowupError(f"nonfinite state at t={t}")
    size = max(np.abs(n).max(), np.abs(p).max(), abs(z))
    if size > BLOWUP_LIMIT:
        raise BlowupError(f"state norm {size:.3e} exceeds {BLOWUP_LIMIT:.0e} at t={t}")


def step_imex(state: State, params: Parameters, light: LightModel, kind: FunctionalResponse,
              grid: Grid, dt: float) -> State:
    """One IMEX Euler step."""
    return ColumnStepper(params, light, kind, grid, dt).imex(state)


def step_explicit(state: State, params: Parameters, light: LightModel, kind: FunctionalResponse,
                  grid: Grid, dt: float) -> State:
    """One classical RK4 step of the full semi-discrete system."""
    return ColumnStepper(params, light, kind, grid, dt).rk4(state)


def budget(state: State, params: Parameters, grid: Grid) -> float:
    mass = grid.integrate(state.n) + grid.integrate(state.p)
    if params.k > 0:
        mass += params.H * state.z / params.k
    return mass


def budget_source(state: State, params: Parameters, kind: FunctionalResponse, grid: Grid,
                  tol: float = NEGATIVE_TOL) -> float:
    """Boundary inflow minus the linear losses; the time derivative of `budget` in the continuum."""
    source = params.D * boundary_gradient(state.n, grid) - params.m_p * grid.integrate(state.p)
    if params.k > 0:
        return source - params.m / params.k * params.H * state.z
    # without a food utilization term the grazing loss does not return through z
    return source - state.z * grid.integrate(response_field(kind, state.p, tol))


def snapshot_diagnostics(state: State, params: Parameters, kind: FunctionalResponse, grid: Grid,
                         previous: Optional[State] = None, tol: float = NEGATIVE_TOL) -> SnapshotDiagnostics:
    """Diagnostics record of one snapshot; the flux residual needs the state one step earlier."""
    residual = math.nan
    if previous is not None:
        dt = state.t - previous.t
        residual = ((budget(state, params, grid) - budget(previous, params, grid)) / dt
                    - budget_source(state, params, kind, grid, tol))
    return SnapshotDiagnostics(
        t=state.t,
        z=state.z,
        int_p=grid.integrate(state.p),
        int_gp=grid.integrate(response_field(kind, state.p, tol)),
        min_n=float(state.n.min()),
        max_n=float(state.n.max()),
        min_p=float(state.p.min()),
        flux_residual=float(residual),
    )


def _worst_entry(state: State) -> Tuple[float, Optional[int]]:
    """Most negative entry and its node (None for z)."""
    candidates = [(float(state.n.min()), int(np.argmin(state.n))),
                  (float(state.p.min()), int(np.argmin(state.p))),
                  (state.z, None)]
    return min(candidates, key=lambda c: c[0])


def _clamp(state: State) -> State:
    return State(np.maximum(state.n, 0.0), np.maximum(state.p, 0.0), max(state.z, 0.0), state.t)


def integrate(state0: State, params: Parameters, light: LightModel, kind: FunctionalResponse, grid: Grid,
              config: SolverConfig, progress: bool = False) -> Trajectory:
    """Step from state0 to config.t_end, recording snapshots at the configured cadence."""
    tol = config.positivity_tol
    trajectory = Trajectory(grid)

    worst, node = _worst_entry(state0)
    if worst < -tol:
        raise PositivityViolationError(f"initial state has entry {worst} below -{tol}", worst, node, state0.t)

    trajectory.append(state0, snapshot_diagnostics(state0, params, kind, grid, tol=tol))

    t0, dt, t_end = state0.t, config.dt, config.t_end
    n_full = int(math.floor((t_end - t0) / dt + 1e-9))
    remainder = (t_end - t0) - n_full * dt
    steps = n_full + (1 if remainder > 1e-12 * max(1.0, t_end) else 0)

    logging.info(f"Integrating to t={t_end} with {config.scheme.value}, dt={dt}, {steps} steps, M={grid.M}")

    stepper = ColumnStepper(params, light, kind, grid, dt, tol)
    state = state0
    try:
        for i in tqdm(range(1, steps + 1), desc="Integrating", unit="step", disable=not progress):
            last = i == steps
            if i > n_full:
                stepper = ColumnStepper(params, light, kind, grid, remainder, tol)
            t_new = t_end if last else t0 + i * dt

            previous = state
            state = stepper.step(config.scheme, state, t_new)

            worst, node = _worst_entry(state)
            if worst < -tol:
                raise PositivityViolationError(
                    f"entry {worst} below -{tol} at node {node}, t={state.t}", worst, node, state.t)
            if worst < 0 and config.clamp_mode:
                logging.warning(f"Clamped negative entry {worst} at node {node}, t={state.t}")
                trajectory.events.append({"event": "clamp", "t": state.t, "node": node, "value": worst})
                state = _clamp(state)

            if i % config.snapshot_every == 0 or last:
                trajectory.append(state, snapshot_diagnostics(state, params, kind, grid, previous, tol))
    except SimulationError as e:
        logging.error(f"Integration stopped at t={state.t}: {e}")
        e.trajectory = trajectory
        raise

    logging.info(f"Finished at t={state.t} with {len(trajectory)} snapshots")
    return trajectory
