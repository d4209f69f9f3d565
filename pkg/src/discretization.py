"""
Second-order finite differences on the column and the tridiagonal systems of
the implicit half of the time step.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from src.errors import DomainError, ShapeMismatchError, SingularSystemError
from src.model import Grid, check_field
from src.schema import Parameters


class BoundaryKind(str, Enum):
    NEUMANN_DIRICHLET = "NeumannDirichlet"
    NEUMANN_NEUMANN = "NeumannNeumann"


@dataclass(frozen=True)
class BoundarySpec:
    """
    Boundary pair of one field. NeumannDirichlet is zero flux at h=0 and the
    value `dirichlet_value` at h=H (nutrient); NeumannNeumann is zero flux at
    both ends (phytoplankton).
    """

    kind: BoundaryKind
    dirichlet_value: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", BoundaryKind(self.kind))
        if self.kind is BoundaryKind.NEUMANN_DIRICHLET and self.dirichlet_value < 0:
            raise DomainError(f"Dirichlet value must be >= 0, got {self.dirichlet_value}")

    @classmethod
    def nutrient(cls, params: Parameters) -> "BoundarySpec":
        return cls(BoundaryKind.NEUMANN_DIRICHLET, params.n_H)

    @classmethod
    def phytoplankton(cls) -> "BoundarySpec":
        return cls(BoundaryKind.NEUMANN_NEUMANN)

    @property
    def pinned(self) -> bool:
        return self.kind is BoundaryKind.NEUMANN_DIRICHLET


@dataclass(frozen=True)
class Tridiagonal:
    """
    Tridiagonal matrix with sub-diagonal `lower` (M-1), `diag` (M) and
    super-diagonal `upper` (M-1). Rows flagged in `pinned` are identity rows
    whose right-hand side is replaced by `load`.
    """

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray
    load: Optional[np.ndarray] = None
    pinned: Optional[np.ndarray] = None

    def __post_init__(self):
        m = len(self.diag)
        if len(self.lower) != m - 1 or len(self.upper) != m - 1:
            raise ShapeMismatchError(
                f"off-diagonals must have length {m - 1}, got {len(self.lower)} and {len(self.upper)}")

    @property
    def size(self) -> int:
        return len(self.diag)

    def apply_load(self, rhs: np.ndarray) -> np.ndarray:
        if self.pinned is None:
            return rhs
        return np.where(self.pinned, self.load, rhs)

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.lower, -1) + np.diag(self.upper, 1)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = self.diag * x
        y[1:] += self.lower * x[:-1]
        y[:-1] += self.upper * x[1:]
        return y

    def is_diagonally_dominant(self) -> bool:
        off = np.zeros(self.size)
        off[1:] += np.abs(self.lower)
        off[:-1] += np.abs(self.upper)
        margin = np.abs(self.diag) - off
        return bool((margin >= 0).all() and (margin > 0).any())


def apply_laplacian(u, bc: BoundarySpec, grid: Grid) -> np.ndarray:
    """
    Three-point second difference with a mirror ghost node at each zero-flux
    end. A Dirichlet end returns 0 at its node.
    """
    u = check_field(u, grid)
    out = np.empty_like(u)
    out[1:-1] = u[:-2] - 2.0 * u[1:-1] + u[2:]
    out[0] = 2.0 * (u[1] - u[0])
    if bc.pinned:
        out[-1] = 0.0
    else:
        out[-1] = 2.0 * (u[-2] - u[-1])
    return out / grid.dx ** 2


def build_implicit_system(bc: BoundarySpec, grid: Grid, params: Parameters, dt: float,
                          decay: float = 0.0) -> Tridiagonal:
    """Matrix of I - dt*D*Laplacian + dt*decay*I with the boundary rows of `bc`."""
    if not dt > 0:
        raise DomainError(f"time step must be > 0, got {dt}")
    if decay < 0:
        raise DomainError(f"decay must be >= 0, got {decay}")

    M = grid.M
    c = dt * params.D / grid.dx ** 2
    diag = np.full(M, 1.0 + 2.0 * c + dt * decay)
    lower = np.full(M - 1, -c)
    upper = np.full(M - 1, -c)
    upper[0] = -2.0 * c

    if bc.pinned:
        diag[-1] = 1.0
        lower[-1] = 0.0
        pinned = np.zeros(M, dtype=bool)
        pinned[-1] = True
        load = np.zeros(M)
        load[-1] = bc.dirichlet_value
        return Tridiagonal(lower, diag, upper, load=load, pinned=pinned)

    lower[-1] = -2.0 * c
    return Tridiagonal(lower, diag, upper)


def thomas_solve(sys: Tridiagonal, rhs) -> np.ndarray:
    """
    Solve sys @ x = rhs by the Thomas algorithm. Pinned rows take their value
    from the load vector.
    """
    d = np.asarray(rhs, dtype=float)
    n = sys.size
    if d.shape != (n,):
        raise ShapeMismatchError(f"right-hand side of shape {d.shape} does not match a system of size {n}")
    # plain floats: the sweeps are scalar recurrences
    a = sys.lower.tolist()
    b = sys.diag.tolist()
    c = sys.upper.tolist() + [0.0]
    d = sys.apply_load(d).tolist()

    c_star = [0.0] * n
    d_star = [0.0] * n
    pivot = b[0]
    if pivot == 0.0:
        raise SingularSystemError("zero pivot in row 0")
    c_star[0] = c[0] / pivot
    d_star[0] = d[0] / pivot
    for j in range(1, n):
        pivot = b[j] - a[j - 1] * c_star[j - 1]
        if pivot == 0.0:
            raise SingularSystemError(f"zero pivot in row {j}")
        c_star[j] = c[j] / pivot
        d_star[j] = (d[j] - a[j - 1] * d_star[j - 1]) / pivot

    x = [0.0] * n
    x[-1] = d_star[-1]
    for j in range(n - 2, -1, -1):
        x[j] = d_star[j] - c_star[j] * x[j + 1]
    return np.array(x)
