import numpy as np
import pytest

from ikwave.core import Bathymetry, ModelParams, PeriodicGrid, ScalarField


def smooth_field(grid, rng, amplitude=0.1, modes=4):
    x = grid.points
    out = np.zeros(grid.modes)
    for m in range(1, modes + 1):
        a, b = rng.normal(size=2) * amplitude / m ** 2
        out += a * np.cos(m * x) + b * np.sin(m * x)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def grid64():
    return PeriodicGrid(2 * np.pi, 64)


def make_case(grid, family, N, delta, rng, bottom=0.1):
    params = ModelParams(family, N, delta)
    eta = ScalarField(grid, smooth_field(grid, rng))
    if params.family.value == "h1":
        bathy = Bathymetry.flat(grid)
    else:
        bathy = Bathymetry.from_values(grid, smooth_field(grid, rng, bottom), family)
    return params, eta, bathy
