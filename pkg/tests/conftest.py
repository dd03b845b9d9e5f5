import numpy as np
import pytest

from stsm.data import generate_synthetic


@pytest.fixture(scope="session")
def synth():
    """The 60-location, 14-day, 5-minute desk dataset."""
    return generate_synthetic(60, 14, 5, seed=7)


@pytest.fixture(scope="session")
def small_synth():
    return generate_synthetic(16, 3, 30, seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
