import numpy as np
import pytest

from hedgeprice.market_geometry import move_set_preset


@pytest.fixture
def chi1():
    return move_set_preset("chi1")


@pytest.fixture
def chi2():
    return move_set_preset("chi2")


@pytest.fixture
def three_asset():
    return move_set_preset("three_asset")


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)
