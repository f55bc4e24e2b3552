import numpy as np
import pytest

from bfaits.errors import InvalidInstance, NoFeasibleArm, TiedBest
from bfaits.problem import ProblemInstance


def random_instance(rng, k_max=10, m_max=4, k_min=2):
    """A valid random instance: means in (-2, 2), variances in (0.2, 2)."""
    while True:
        k = int(rng.integers(k_min, k_max + 1))
        m = int(rng.integers(0, m_max + 1))
        mu = rng.uniform(-2, 2, size=(k, m + 1))
        sigma2 = rng.uniform(0.2, 2.0, size=(k, m + 1))
        try:
            return ProblemInstance(mu, sigma2, np.zeros(m))
        except (NoFeasibleArm, TiedBest, InvalidInstance):
            continue


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
