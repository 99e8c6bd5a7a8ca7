import numpy as np
import pytest

from movolt import spectrum


@pytest.fixture(scope="session")
def mp1():
    """Square-aspect Marchenko-Pastur quadrature (the hard-edge case)."""
    return spectrum.mp_measure(1.0)


@pytest.fixture(scope="session")
def mp2():
    return spectrum.mp_measure(2.0)


@pytest.fixture(scope="session")
def mp4():
    return spectrum.mp_measure(4.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
