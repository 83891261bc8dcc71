import numpy as np
import pytest

from gxestat import load_oats, load_watermelon


@pytest.fixture(scope="session")
def watermelon():
    return load_watermelon()


@pytest.fixture(scope="session")
def oats():
    return load_oats()


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
