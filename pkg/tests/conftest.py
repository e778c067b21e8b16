import numpy as np
import pytest

from fuzzmech.grid import gaussian_amplitude
from fuzzmech.schema import ComplexField, Hamiltonian, UniformGrid, WaveState


@pytest.fixture
def line_grid():
    return UniformGrid.build(n=256, length=20.0, periodic=True)


@pytest.fixture
def fine_line_grid():
    return UniformGrid.build(n=1024, length=20.0, periodic=True)


@pytest.fixture
def plane_grid():
    return UniformGrid.build(n=64, length=12.0, periodic=True, dim=2)


@pytest.fixture
def bounded_grid():
    return UniformGrid.build(n=256, length=20.0, periodic=False)


def gaussian_state(grid, center=0.0, sigma=1.0, momentum=0.0, mu=1.0):
    center = (center,) * grid.dim if np.isscalar(center) else tuple(center)
    momentum = (momentum,) * grid.dim if np.isscalar(momentum) else tuple(momentum)
    values = gaussian_amplitude(grid, center, sigma, momentum)
    return WaveState(eta=ComplexField(grid=grid, values=values), mu=mu)


@pytest.fixture
def gaussian(line_grid):
    return gaussian_state(line_grid)


@pytest.fixture
def free_hamiltonian(line_grid):
    return Hamiltonian.free(1.0, line_grid)
