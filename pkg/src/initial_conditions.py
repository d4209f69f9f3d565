"""
Initial fields built from the named profiles of a run configuration.
"""
import numpy as np

from src.errors import DomainError, ShapeMismatchError
from src.model import Grid, State
from src.schema import InitialProfile, Parameters, RunConfig
from utils.file_utils import read_csv_columns


def grid_from_config(config: RunConfig) -> Grid:
    return Grid(H=config.params.H, M=config.grid.M)


def build_profile(profile: InitialProfile, field: str, params: Parameters, grid: Grid,
                  rng: np.random.Generator) -> np.ndarray:
    """
    One initial field. Cosine modes follow the eigenbasis of the field's
    boundary pair: cos((k+1/2)*pi*h/H) for n, cos(k*pi*h/H) for p.
    """
    h, H = grid.nodes, grid.H
    if profile.profile == "constant":
        if profile.value is not None:
            value = profile.value
        else:
            value = params.n_H if field == "n" else 0.0
        return np.full(grid.M, value)
    if profile.profile == "gaussian-bump":
        center = 0.5 * H if profile.center is None else profile.center
        width = 0.1 * H if profile.width is None else profile.width
        return profile.base + profile.amplitude * np.exp(-((h - center) / width) ** 2)
    if profile.profile == "cosine-mode":
        k = profile.k + 0.5 if field == "n" else profile.k
        return profile.base + profile.amplitude * np.cos(k * np.pi * h / H)
    if profile.profile == "random":
        return rng.uniform(profile.low, profile.high, grid.M)
    if profile.profile == "from-file":
        column = read_csv_columns(profile.path)[field]
        if column.shape != (grid.M,):
            raise ShapeMismatchError(f"{profile.path} holds {column.size} nodes, the grid has {grid.M}")
        return column
    raise DomainError(f"unknown profile {profile.profile}")


def build_initial_state(config: RunConfig, grid: Grid = None) -> State:
    grid = grid or grid_from_config(config)
    rng = np.random.default_rng(config.run.seed)
    fields = {}
    for name, profile in (("n", config.initial.n), ("p", config.initial.p)):
        values = build_profile(profile, name, config.params, grid, rng)
        if (values < 0).any():
            raise DomainError(f"initial {name} has a negative entry {values.min()}")
        fields[name] = values
    return State(fields["n"], fields["p"], config.initial.z, 0.0)
