import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from src.model import Grid, State  # noqa: E402
from src.schema import Parameters  # noqa: E402


def smooth_fields(params: Parameters, grid: Grid, z: float = 0.2) -> State:
    """Low-mode data compatible with both boundary pairs."""
    h, H = grid.nodes, grid.H
    n = params.n_H + 0.5 * np.cos(0.5 * np.pi * h / H)
    n[-1] = params.n_H
    p = 1.0 + 0.5 * np.cos(np.pi * h / H)
    return State(n, p, z, 0.0)


@pytest.fixture
def params():
    return Parameters()


@pytest.fixture
def extinction_params():
    return Parameters(chi=1.0, r=0.5, m_p=1.0, m=0.1, k=1.0, H=1.0, gamma=1.0, n_H=1.0)


@pytest.fixture
def grid():
    return Grid(H=1.0, M=21)


@pytest.fixture
def smooth_state(params, grid):
    return smooth_fields(params, grid)


@pytest.fixture
def make_smooth():
    return smooth_fields


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def write_config(tmp_path):
    """Write config text to a file and return its path."""
    def _write(text: str, name: str = "run.cfg"):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path
    return _write
