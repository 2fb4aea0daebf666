import numpy as np
import pytest

from pcinpaint import autodiff


@pytest.fixture(autouse=True)
def check_finite_tensors():
    """Every tensor created during a test is checked for NaN/Inf."""
    autodiff.NAN_CHECK = True
    yield
    autodiff.NAN_CHECK = False


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
