import numpy as np
import pytest

from nanolab import potentials


@pytest.fixture(scope="session")
def pots_soft():
    return potentials.default_soft()


@pytest.fixture(scope="session")
def pots_stiff():
    return potentials.default_stiff()


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
