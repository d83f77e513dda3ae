import numpy as np
import pytest

from mepoisson.CorrectedLoss import Dataset


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run the long Monte Carlo checks")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def random_spd(rng, p, scale=0.1):
    A = rng.standard_normal((p, p))
    return scale * (A @ A.T / p + 0.1 * np.eye(p))


def poisson_data(seed, n, p, beta=None, omega_scale=0.0, x_scale=0.5):
    """
    Small Poisson sample with W = X + U, U ~ N(0, omega_scale * I).
    """
    rng = np.random.default_rng(seed)
    if beta is None:
        beta = np.zeros(p)
        beta[:2] = (0.75, -0.75)
    X = np.sqrt(x_scale) * rng.standard_normal((n, p))
    Y = rng.poisson(np.exp(X @ beta))
    omega = omega_scale * np.eye(p)
    W = X + np.sqrt(omega_scale) * rng.standard_normal((n, p))
    return Dataset(W, Y, omega)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
