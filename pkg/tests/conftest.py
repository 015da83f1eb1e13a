import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from privguess import core

settings.register_profile(
    "repo",
    deadline=None,
    max_examples=60,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")


def random_joint(rng: np.random.Generator, M: int, N: int, power: float = 1.0) -> core.JointPmf:
    """Random full-support joint; larger ``power`` gives more skewed tables."""
    table = rng.random((M, N)) ** power + 1e-3
    return core.JointPmf.from_array(table, normalize=True)


def random_channel(rng: np.random.Generator, N: int, K: int) -> core.Channel:
    rows = rng.random((N, K)) + 1e-6
    return core.Channel(rows / rows.sum(axis=1, keepdims=True))


@st.composite
def joints(draw, max_m=4, max_n=4):
    M = draw(st.integers(1, max_m))
    N = draw(st.integers(1, max_n))
    cells = draw(st.lists(st.floats(0.0, 1.0), min_size=M * N, max_size=M * N))
    table = np.array(cells).reshape(M, N) + 1e-6
    return core.JointPmf.from_array(table, normalize=True)


@st.composite
def channels_for(draw, N, max_k=4):
    K = draw(st.integers(1, max_k))
    cells = draw(st.lists(st.floats(0.0, 1.0), min_size=N * K, max_size=N * K))
    rows = np.array(cells).reshape(N, K) + 1e-6
    return core.Channel(rows / rows.sum(axis=1, keepdims=True))


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def binary_joint():
    """``X ~ Bernoulli(0.6)`` through ``BSC(0.2)``."""
    return core.JointPmf.from_prior_and_channel([0.4, 0.6], core.bsc(0.2))
