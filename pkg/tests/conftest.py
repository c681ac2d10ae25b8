import numpy as np
import pytest

from prefgame import bt_instance, mixed_instance, rps_instance


@pytest.fixture
def rps():
    return rps_instance()


@pytest.fixture
def bt():
    return bt_instance()


@pytest.fixture
def mixed():
    return mixed_instance()


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
