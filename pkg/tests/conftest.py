import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_complex(rng, shape, scale=1.0):
    return scale * (rng.normal(size=shape) + 1j * rng.normal(size=shape))


def random_density(rng, n=2):
    m = random_complex(rng, (n, n))
    rho = m @ m.conj().T
    return rho / np.trace(rho).real


@pytest.fixture
def density2(rng):
    return random_density(rng, 2)


def random_real_density(rng, n=2):
    m = rng.normal(size=(n, n))
    rho = m @ m.T
    return rho / np.trace(rho)


@pytest.fixture
def real_density2(rng):
    return random_real_density(rng, 2)
