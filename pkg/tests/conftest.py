import numpy as np
import pytest

from cprpw import rng
from cprpw.finite import example_matrix
from cprpw.pipeline import random_signal


@pytest.fixture
def V():
    return example_matrix()


@pytest.fixture
def gen():
    return np.random.default_rng(12345)


@pytest.fixture
def sample_signal():
    """Support -10..10, uniform complex coefficients, f(0) = 0."""
    return random_signal(rng.stream(7, "signal", 0))


def random_vector(g, k=3):
    return g.standard_normal(k) + 1j * g.standard_normal(k)
