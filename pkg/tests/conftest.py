import numpy as np
import pytest

from trltsk.varpart import AntecedentParams


def random_params(rng, K, d):
    return AntecedentParams(rng.normal(size=(K, d)), rng.uniform(1.0, 10.0, size=(K, d)))


def explicit_mean_gap(z_a, z_b):
    """Squared distance of row means, by plain loops."""
    m = z_a.shape[1]
    total = 0.0
    for j in range(m):
        mean_a = sum(z_a[:, j]) / z_a.shape[0]
        mean_b = sum(z_b[:, j]) / z_b.shape[0]
        total += (mean_a - mean_b) ** 2
    return total


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
