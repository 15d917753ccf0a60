import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)


def fresh_rng(seed=20260809):
    return np.random.default_rng(seed)
