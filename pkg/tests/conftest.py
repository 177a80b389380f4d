import pytest

from lognodal import glue, shoot
from lognodal.model import Params


@pytest.fixture(scope="session")
def std_params():
    return Params()


@pytest.fixture(scope="session")
def ground(std_params):
    return shoot.shoot_k(std_params, 1)


@pytest.fixture(scope="session")
def ground_neg(std_params):
    return shoot.shoot_k(std_params, 1, -1.0)


@pytest.fixture(scope="session")
def nodal2(std_params):
    return shoot.shoot_k(std_params, 2)


@pytest.fixture(scope="session")
def nodal2_neg(std_params):
    return shoot.shoot_k(std_params, 2, -1.0)


@pytest.fixture(scope="session")
def glued2(std_params):
    return glue.optimize_nodes(std_params, 2)
