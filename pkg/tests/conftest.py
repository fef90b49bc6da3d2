import numpy as np
import pytest

import tubelab as tl
from tubelab import discretize, fiber as fiber_mod


@pytest.fixture(scope="session")
def circle_model():
    return tl.CircleInPlane(1.0)


@pytest.fixture(scope="session")
def circle_grid(circle_model):
    return discretize.build_grid(circle_model, 64, 31)


@pytest.fixture(scope="session")
def circle_spectrum(circle_grid):
    return fiber_mod.fiber_spectrum(circle_grid.fiber, n_modes=6)


@pytest.fixture(scope="session")
def synthetic_model():
    return tl.SyntheticFiberModel(2, 1.5)


@pytest.fixture(scope="session")
def synthetic_grid(synthetic_model):
    return discretize.build_grid(synthetic_model, 1, 48, 32)


@pytest.fixture(scope="session")
def rng():
    return np.random.Generator(np.random.Philox(key=2024))
