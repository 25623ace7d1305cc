import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from srflows import models

settings.register_profile("ci", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ci")

GOLDEN = (3.0 + np.sqrt(5.0)) / 2.0
LN_GOLDEN = float(np.log(GOLDEN))


def fd_gradient(f, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def fd_jacobian(f, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2 * h))
    return np.array(cols).T


@pytest.fixture(scope="session")
def hyperbolic():
    return models.make_suspension_model([[2, 1], [1, 1]])


@pytest.fixture(scope="session")
def elliptic():
    return models.make_suspension_model([[0, 1], [-1, 0]])


@pytest.fixture(scope="session")
def parabolic():
    return models.make_suspension_model([[1, 1], [0, 1]])


SUSPENSION_MATRICES = [
    [[2, 1], [1, 1]],
    [[0, 1], [-1, 0]],
    [[1, 1], [0, 1]],
    [[-2, 1], [-1, 0]],
    [[0, -1], [1, 1]],
    [[-1, 1], [0, -1]],
    [[1, 0], [0, 1]],
    [[-1, 0], [0, -1]],
]
