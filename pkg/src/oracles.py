"""
Reference solutions used to validate the discretization: eigenfunction series
of the linear heat problems, a dense LU solver and observed-order fitting.
"""
from dataclasses import dataclass
from typing import Iterable, Sequence, Tuple

import numpy as np
import scipy.linalg

from src.discretization import BoundaryKind
from src.errors import DomainError, SingularSystemError
from src.model import Grid


@dataclass(frozen=True)
class HeatSeriesSolution:
    """
    Finite cosine series solving u_t = D u_hh - decay*u on [0, H].

    NeumannNeumann uses the basis cos(k*pi*h/H); NeumannDirichlet uses
    cos((k+1/2)*pi*h/H) and adds the constant `shift` (the boundary value).
    """

    bc: BoundaryKind
    coefficients: Tuple[float, ...]
    H: float
    D: float = 1.0
    decay: float = 0.0
    shift: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "bc", BoundaryKind(self.bc))
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        if len(self.coefficients) < 1:
            raise DomainError("a series solution needs at least one coefficient")

    def wavenumbers(self) -> np.ndarray:
        k = np.arange(len(self.coefficients), dtype=float)
        if self.bc is BoundaryKind.NEUMANN_DIRICHLET:
            k = k + 0.5
        return k * np.pi / self.H

    def evaluate(self, t: float, grid: Grid) -> np.ndarray:
        q = self.wavenumbers()
        amplitudes = np.asarray(self.coefficients) * np.exp(-(q ** 2) * self.D * t - self.decay * t)
        u = self.shift + np.cos(np.outer(grid.nodes, q)) @ amplitudes
        if self.bc is BoundaryKind.NEUMANN_DIRICHLET:
            u[-1] = self.shift
        return u


def heat_exact_neumann(p0_coeffs: Sequence[float], t: float, grid: Grid, D: float = 1.0,
                       decay: float = 0.0) -> np.ndarray:
    """Zero-flux heat solution from cosine coefficients of p0."""
    return HeatSeriesSolution(BoundaryKind.NEUMANN_NEUMANN, tuple(p0_coeffs), grid.H, D, decay).evaluate(t, grid)


def heat_exact_mixed(n0_coeffs: Sequence[float], t: float, grid: Grid, n_H: float,
                     D: float = 1.0) -> np.ndarray:
    """Zero flux at h=0, value n_H at h=H; coefficients are those of n0 - n_H."""
    return HeatSeriesSolution(BoundaryKind.NEUMANN_DIRICHLET, tuple(n0_coeffs), grid.H, D,
                              shift=n_H).evaluate(t, grid)


def dense_solve(matrix, rhs) -> np.ndarray:
    """Gaussian elimination with partial pivoting (LAPACK getrf/getrs)."""
    a = np.asarray(matrix, dtype=float)
    b = np.asarray(rhs, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or b.shape != (a.shape[0],):
        raise DomainError(f"need a square matrix and a matching vector, got {a.shape} and {b.shape}")
    lu, piv = scipy.linalg.lu_factor(a, check_finite=True)
    if (np.abs(np.diag(lu)) == 0.0).any():
        raise SingularSystemError("matrix is singular")
    return scipy.linalg.lu_solve((lu, piv), b)


def convergence_order(errors: Iterable[Tuple[float, float]]) -> float:
    """Least-squares slope of log(error) against log(dx)."""
    pairs = np.asarray(list(errors), dtype=float)
    if pairs.ndim != 2 or pairs.shape[0] < 2 or pairs.shape[1] != 2:
        raise DomainError("need at least two (dx, error) levels")
    dx, err = pairs[:, 0], pairs[:, 1]
    if (dx <= 0).any() or (err <= 0).any():
        raise DomainError("grid spacings and errors must be positive")
    if np.unique(dx).size < 2:
        raise DomainError("need at least two distinct grid spacings")
    slope, _ = np.polyfit(np.log(dx), np.log(err), 1)
    return float(slope)


def richardson_extrapolate(coarse, fine, order: int = 1) -> np.ndarray:
    """Combine results at step s and s/2 to cancel the leading error term."""
    factor = 2.0 ** order
    return (factor * np.asarray(fine, dtype=float) - np.asarray(coarse, dtype=float)) / (factor - 1.0)
