import os
import numpy as np
import pytest
from scipy.sparse import csr_matrix
from src.basekernel import sparse_se_cross_kernel
from src.data_loader import PointCloud, generate_concentric_circles
from src.graph import cross_similarity, row_normalize
from src.schemas import KernelConfig
from src.subsample import random_subsample


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running acceptance checks (HEATFLOW_SLOW_TESTS=1)")


def pytest_collection_modifyitems(config, items):
    if os.getenv("HEATFLOW_SLOW_TESTS") == "1":
        return
    skip_slow = pytest.mark.skip(reason="set HEATFLOW_SLOW_TESTS=1 to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def line_cloud(values):
    return PointCloud(np.asarray(values, dtype=float)[:, None])


def make_pair(n, s, seed, epsilon=None, r=3, p=2):
    """Transition pair for a random cloud with random landmarks."""
    rng = np.random.default_rng(seed)
    cloud = PointCloud(rng.uniform(size=(n, p)))
    induced = random_subsample(cloud, s, seed)
    if epsilon is None:
        epsilon = float(rng.uniform(0.2, 1.0))
    K = sparse_se_cross_kernel(cloud, induced, KernelConfig(kind="se", epsilon=epsilon, r=min(r, s)))
    return row_normalize(cross_similarity(K, induced.counts))


def dense_pair(Z):
    return row_normalize(csr_matrix(np.asarray(Z, dtype=float)))


@pytest.fixture
def small_circles():
    return generate_concentric_circles(240, 30, seed=3)


@pytest.fixture
def banded_pair():
    """Landmarks evenly spaced on a line: well separated singular values."""
    from src.subsample import induced_from_centers
    cloud = line_cloud(np.linspace(0.0, 1.0, 50))
    induced = induced_from_centers(cloud, np.linspace(0.0, 1.0, 10)[:, None], "random")
    K = sparse_se_cross_kernel(cloud, induced, KernelConfig(kind="se", epsilon=0.06, r=3))
    return row_normalize(cross_similarity(K, induced.counts))
