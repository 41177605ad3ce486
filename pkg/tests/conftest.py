import numpy as np
import pytest

from nhssh.model import ModelParams


@pytest.fixture
def pt_sym():
    return ModelParams.uniform(u=1.0, t1=1.0, v=0.75, t2=0.75, gamma=0.77)


@pytest.fixture
def broken_pt():
    return ModelParams.uniform(u=1.0, t1=0.8, v=0.75, t2=0.6, gamma=0.75)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_params(rng, mode="uniform", mu=0.0):
    u, t1, v, t2 = rng.uniform(0.1, 1.5, size=4)
    if mode == "uniform":
        return ModelParams.uniform(u, t1, v, t2, gamma=rng.uniform(-1, 1), mu=mu)
    g1, g2 = rng.uniform(-1, 1, size=2)
    return ModelParams.prime(u, t1, v, t2, gamma1=g1, gamma2=g2, mu=mu)
