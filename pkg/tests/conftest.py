import numpy as np
import pytest

from vplab.profiles import VelocityGrid, make_builtin


@pytest.fixture(scope="session")
def grid1():
    return VelocityGrid(1, 8.0, 512)


@pytest.fixture(scope="session")
def grid2():
    return VelocityGrid(2, 8.0, 256)


@pytest.fixture(scope="session")
def maxwellian1(grid1):
    return make_builtin("maxwellian", grid1)


@pytest.fixture(scope="session")
def maxwellian2(grid2):
    return make_builtin("maxwellian", grid2)


@pytest.fixture(scope="session")
def double_bump2():
    return make_builtin("double_bump", VelocityGrid(2, 12.0, 512), v0=3.0)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260808)
