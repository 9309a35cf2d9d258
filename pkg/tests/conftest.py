import numpy as np
import pytest

from pdpowers import build_benchmark_instance, build_tiny_instance


@pytest.fixture(scope="session")
def benchmark():
    return build_benchmark_instance()


@pytest.fixture(scope="session")
def tiny():
    return build_tiny_instance()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
