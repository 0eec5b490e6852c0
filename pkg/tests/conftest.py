import numpy as np
import pytest

from platefem.mesh import unit_square_mesh


@pytest.fixture(scope="session")
def mesh1():
    return unit_square_mesh(1)


@pytest.fixture(scope="session")
def mesh2():
    return unit_square_mesh(2)


@pytest.fixture(scope="session")
def mesh4():
    return unit_square_mesh(4)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
