import warnings

import numpy as np
import pytest

from ppmhd.states import IdealGasEos

warnings.filterwarnings("ignore", message=".*TBB.*")

# The admissible pair with equal B1 whose split average at the standard
# viscosity loses positivity.
PAIR_HAT = np.array([0.2, 0.0, 0.2, 0.0, 10.0, 5.0, 0.0, 62.625])
PAIR_CHECK = np.array([0.32, 0.0, -0.32, 0.0, 10.0, 10.0, 0.0, 100.16025])


@pytest.fixture(scope="session")
def eos():
    return IdealGasEos(1.4)


@pytest.fixture()
def pair():
    return PAIR_HAT.copy(), PAIR_CHECK.copy()


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
