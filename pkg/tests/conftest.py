import numpy as np
import pytest

from ggmwatch import gen_chain_precision, invert_spd


@pytest.fixture(scope="session")
def chain5():
    return gen_chain_precision(5, 0.5)


@pytest.fixture(scope="session")
def chain5_cov(chain5):
    return invert_spd(chain5.entries)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
