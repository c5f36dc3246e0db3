import numpy as np
import pytest

from kdvflow.grassmann import from_generating, from_measure
from kdvflow.measures import SpectralMeasure, norming_constants


@pytest.fixture(scope="session")
def sigma_a():
    return SpectralMeasure([0.0], [0.25])


@pytest.fixture(scope="session")
def sigma_b():
    return SpectralMeasure([-0.2, 0.4], [0.1, 0.15])


@pytest.fixture(scope="session")
def nc_a(sigma_a):
    return norming_constants(sigma_a)


@pytest.fixture(scope="session")
def nc_b(sigma_b):
    return norming_constants(sigma_b)


@pytest.fixture(scope="session")
def w_a(sigma_a):
    return from_measure(sigma_a, 128)


@pytest.fixture(scope="session")
def w_b(sigma_b):
    return from_measure(sigma_b, 128)


@pytest.fixture(scope="session")
def w_a64(sigma_a):
    return from_measure(sigma_a, 64)


@pytest.fixture(scope="session")
def w_b64(sigma_b):
    return from_measure(sigma_b, 64)


@pytest.fixture(scope="session")
def h_plus():
    return from_generating([], [], 128)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260810)
