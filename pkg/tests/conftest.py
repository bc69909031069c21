"""Shared fixtures for the EasyUQ tests."""
import numpy as np
import pytest

from easyuq.core import TrainingData
from easyuq.simulation import SimConfig, simulate


@pytest.fixture(scope="session")
def gamma_data() -> TrainingData:
    """n = 500 pairs from the Gamma testbed with a fixed seed."""
    return simulate(SimConfig(n=500, seed=7))


def _discrete_pairs() -> tuple[np.ndarray, np.ndarray, np.random.Generator]:
    rng = np.random.default_rng(3)
    x = rng.uniform(0.0, 10.0, size=300)
    level = np.clip(np.floor(x / 10.0 * 3.0 + rng.normal(0.0, 0.5, size=300)), 0, 2)
    return x, level, rng


@pytest.fixture(scope="session")
def discrete_data() -> TrainingData:
    """Outcomes exactly in {0, 1, 2}, increasing in x."""
    x, level, _ = _discrete_pairs()
    return TrainingData(x=x, y=level)


@pytest.fixture(scope="session")
def jittered_discrete_data() -> TrainingData:
    """The discrete outcomes with sub-floor jitter, so no two outcomes tie."""
    x, level, rng = _discrete_pairs()
    return TrainingData(x=x, y=level + rng.uniform(0.0, 1e-9, size=300))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
