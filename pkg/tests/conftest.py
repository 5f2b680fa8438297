import numpy as np
import pytest

from gridshield import NoiseModel, build_topology, ieee30


@pytest.fixture(scope="session")
def network():
    return ieee30()


@pytest.fixture(scope="session")
def topology(network):
    return build_topology(network)


@pytest.fixture(scope="session")
def noise():
    return NoiseModel(0.01)


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
