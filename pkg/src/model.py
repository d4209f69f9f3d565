"""
Domain types and the reaction (non-diffusive) terms of the nutrient /
phytoplankton / zooplankton column model.
"""
from dataclasses import dataclass
from functools import cached_property
from typing import Tuple, Union

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid

from src.errors import DomainError, ShapeMismatchError, SingularityError
from src.schema import FunctionalResponse, LightModel, Parameters

# Negative densities down to this level are round-off, not a domain error.
NEGATIVE_TOL = 1e-10

# Lowest admissible value of the uptake denominator 1 + chi*n.
DENOMINATOR_FLOOR = 0.5


@dataclass(frozen=True)
class Grid:
    """Uniform discretization of the column [0, H] with M nodes."""

    H: float
    M: int

    def __post_init__(self):
        if self.M < 3:
            raise DomainError(f"grid needs at least 3 nodes, got {self.M}")
        if not self.H > 0:
            raise DomainError(f"depth must be > 0, got {self.H}")

    @property
    def dx(self) -> float:
        return self.H / (self.M - 1)

    @cached_property
    def nodes(self) -> np.ndarray:
        h = np.arange(self.M) * self.dx
        h[-1] = self.H
        h.setflags(write=False)
        return h

    @cached_property
    def weights(self) -> np.ndarray:
        """Composite trapezoid weights."""
        w = np.full(self.M, self.dx)
        w[0] = w[-1] = 0.5 * self.dx
        w.setflags(write=False)
        return w

    def integrate(self, f: np.ndarray) -> float:
        return float(trapezoid(check_field(f, self), dx=self.dx))


@dataclass(frozen=True)
class State:
    """Fields n(h), p(h) and the depth-averaged zooplankton z at time t. All entries are finite."""

    n: np.ndarray
    p: np.ndarray
    z: float
    t: float = 0.0

    def __post_init__(self):
        n = np.array(self.n, dtype=float)
        p = np.array(self.p, dtype=float)
        if n.ndim != 1 or n.shape != p.shape:
            raise ShapeMismatchError(f"n and p must be 1D fields of equal length, got {n.shape} and {p.shape}")
        if not (np.isfinite(n).all() and np.isfinite(p).all() and np.isfinite(self.z)):
            raise DomainError(f"state at t={self.t} has nonfinite entries")
        n.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "z", float(self.z))
        object.__setattr__(self, "t", float(self.t))

    @classmethod
    def trivial(cls, params: Parameters, grid: Grid, t: float = 0.0) -> "State":
        """The equilibrium (n_H, 0, 0)."""
        return cls(np.full(grid.M, params.n_H), np.zeros(grid.M), 0.0, t)

    def min_value(self) -> float:
        return float(min(self.n.min(), self.p.min(), self.z))


def check_field(f, grid: Grid) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != (grid.M,):
        raise ShapeMismatchError(f"field of shape {f.shape} does not match a grid of {grid.M} nodes")
    return f


def _response(kind: FunctionalResponse, p: np.ndarray) -> np.ndarray:
    if kind is FunctionalResponse.HOLLING_I:
        return p.copy()
    if kind is FunctionalResponse.HOLLING_II:
        return p / (1.0 + p)
    if kind is FunctionalResponse.HOLLING_III:
        return p * p / (1.0 + p * p)
    if kind is FunctionalResponse.IVLEV:
        return -np.expm1(-p)
    if kind is FunctionalResponse.RATIO_QUAD:
        return p * p / (1.0 + p)
    raise DomainError(f"unknown functional response {kind!r}")


def eval_g(kind: FunctionalResponse, p: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Functional response g(p) for a nonnegative scalar or field."""
    arr = np.asarray(p, dtype=float)
    if not np.isfinite(arr).all():
        raise DomainError("functional response needs finite densities")
    if (arr < 0).any():
        raise DomainError(f"functional response needs p >= 0, got min {arr.min()}")
    g = _response(FunctionalResponse(kind), arr)
    return float(g) if g.ndim == 0 else g


def response_field(kind: FunctionalResponse, p: np.ndarray, tol: float = NEGATIVE_TOL) -> np.ndarray:
    """g over a field, reading round-off negatives down to -tol as zero."""
    if (p < -tol).any():
        raise DomainError(f"phytoplankton density {p.min()} is below -{tol}")
    return eval_g(kind, np.maximum(p, 0.0))


def translation_lambda(kind: FunctionalResponse, m: float) -> float:
    """
    Smallest lambda with lambda*p - g(p) >= 0 on [0, m], i.e. the supremum of
    g(p)/p there, with its limit value at p = 0.
    """
    if not m > 0:
        raise DomainError(f"bound m must be > 0, got {m}")
    kind = FunctionalResponse(kind)
    if kind is FunctionalResponse.HOLLING_III:
        # p/(1+p^2) peaks at p = 1
        q = min(m, 1.0)
        return q / (1.0 + q * q)
    if kind is FunctionalResponse.RATIO_QUAD:
        return m / (1.0 + m)
    # HollingI is linear, HollingII and Ivlev have g(p)/p decreasing from 1
    return 1.0


def lipschitz_constant(kind: FunctionalResponse, m: float) -> float:
    """Supremum of |g'| on [0, m]."""
    if not m > 0:
        raise DomainError(f"bound m must be > 0, got {m}")
    kind = FunctionalResponse(kind)
    if kind is FunctionalResponse.HOLLING_III:
        q = min(m, 1.0 / np.sqrt(3.0))
        return 2.0 * q / (1.0 + q * q) ** 2
    if kind is FunctionalResponse.RATIO_QUAD:
        return 1.0 - 1.0 / (1.0 + m) ** 2
    return 1.0


def max_growth_rate(params: Parameters) -> float:
    return params.r / params.chi


def extinction_threshold_holds(params: Parameters) -> bool:
    """Phytoplankton mortality beats the maximum growth rate."""
    return params.m_p > max_growth_rate(params)


def cumulative_integral(p, grid: Grid) -> np.ndarray:
    """Trapezoid approximation of the integral of p from 0 to each node."""
    return cumulative_trapezoid(check_field(p, grid), dx=grid.dx, initial=0.0)


def attenuation_profile(light: LightModel, params: Parameters, grid: Grid, p) -> np.ndarray:
    """Per-node coefficient a_j with L_h(p)_j = a_j * p_j."""
    p = check_field(p, grid)
    light = LightModel(light)
    if light is LightModel.EXPONENTIAL_DECAY:
        return params.r * np.exp(-params.gamma * grid.nodes)
    if light is LightModel.SELF_SHADING:
        return params.r * np.exp(-params.nu * cumulative_integral(p, grid))
    raise DomainError(f"unknown light model {light!r}")


def zoo_intake(p, kind: FunctionalResponse, params: Parameters, grid: Grid) -> float:
    """(k/H) * integral of g(p) over the column."""
    g = response_field(kind, check_field(p, grid))
    return params.k / params.H * float(trapezoid(g, dx=grid.dx))


def nutrient_uptake(state: State, params: Parameters, light: LightModel, grid: Grid) -> np.ndarray:
    """L_h(p) * n/(1+chi*n), the flux from nutrient to phytoplankton."""
    n = check_field(state.n, grid)
    p = check_field(state.p, grid)
    denominator = 1.0 + params.chi * n
    if (denominator < DENOMINATOR_FLOOR).any():
        j = int(np.argmin(denominator))
        raise SingularityError(
            f"1 + chi*n = {denominator[j]} < {DENOMINATOR_FLOOR} at node {j}, t={state.t}")
    return attenuation_profile(light, params, grid, p) * p * (n / denominator)


def reaction_terms(state: State, params: Parameters, light: LightModel, kind: FunctionalResponse,
                   grid: Grid, tol: float = NEGATIVE_TOL) -> Tuple[np.ndarray, np.ndarray, float]:
    """Uptake field, predation field z*g(p) and zooplankton intake, without linear decays."""
    uptake = nutrient_uptake(state, params, light, grid)
    g = response_field(kind, state.p, tol)
    intake = params.k / params.H * float(trapezoid(g, dx=grid.dx))
    return uptake, state.z * g, intake


def reaction_rhs(state: State, params: Parameters, light: LightModel, kind: FunctionalResponse,
                 grid: Grid, tol: float = NEGATIVE_TOL) -> Tuple[np.ndarray, np.ndarray, float]:
    """Non-diffusive right-hand side (dn, dp, dz) of the column model."""
    uptake, predation, intake = reaction_terms(state, params, light, kind, grid, tol)
    dn = -uptake
    dp = uptake - predation - params.m_p * state.p
    dz = state.z * (intake - params.m)
    return dn, dp, dz
