import numpy as np
import pytest

from fbsnn import SimulationParams


@pytest.fixture
def params():
    return SimulationParams()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
