import numpy as np
import pytest

from wipsim.dynamics import discretize, linearize
from wipsim.harness import default_weights
from wipsim.legmodel import JointConfiguration, nominal_link_config, reduce_to_pendulum
from wipsim.lqr import design_controller


@pytest.fixture(scope="session")
def nominal():
    return nominal_link_config()


@pytest.fixture(scope="session")
def links(nominal):
    return nominal[0]


@pytest.fixture(scope="session")
def limits(nominal):
    return nominal[1]


@pytest.fixture(scope="session")
def straight_params(links, limits):
    return reduce_to_pendulum(JointConfiguration.symmetric(), links, limits)


@pytest.fixture(scope="session")
def discrete_model(straight_params):
    return discretize(linearize(straight_params), 1e-3)


@pytest.fixture(scope="session")
def nominal_design(discrete_model):
    return design_controller(discrete_model, default_weights())


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
