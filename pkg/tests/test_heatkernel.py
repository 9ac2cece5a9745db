import csv
import numpy as np
import pytest
from src.basekernel import sparse_se_cross_kernel
from src.data_loader import PointCloud
from src.graph import cross_similarity, row_normalize
from src.heatkernel import (
    HeatKernelCovariance, add_jitter, covariance_block, dense_covariance, dump_block_csv
)
from src.schemas import KernelConfig
from src.spectral import LaplacianSpectrum, truncated_svd
from src.subsample import random_subsample
from tests.conftest import make_pair


def _spectrum(n=80, s=15, seed=0):
    pair = make_pair(n, s, seed=seed, epsilon=0.2)
    return truncated_svd(pair, pair.s)


class TestHeatKernelCovariance:
    """Test blockwise heat-kernel covariance."""

    def test_single_eigenpair(self):
        spectrum = LaplacianSpectrum(np.array([0.0]), np.array([[2 ** -0.5], [2 ** -0.5]]))
        cov = HeatKernelCovariance(spectrum, t=3.0)
        assert np.allclose(cov.block([0, 1], [0, 1]), np.ones((2, 2)), atol=1e-15)

    def test_two_point_chain(self):
        d = 2.0 * np.sqrt(np.log(2.0))
        cloud = PointCloud(np.array([[0.0], [d]]))
        induced = random_subsample(cloud, 2, seed=0)
        K = sparse_se_cross_kernel(cloud, induced, KernelConfig(kind="se", epsilon=1.0, r=2))
        spectrum = truncated_svd(row_normalize(cross_similarity(K, induced.counts)), 2)
        assert np.allclose(spectrum.eigenvalues, [0.0, 2.0 / 3.0], atol=1e-12)
        for t in (0.1, 1.0, 5.0):
            e = np.exp(-2.0 * t / 3.0)
            expected = np.array([[1 + e, 1 - e], [1 - e, 1 + e]])
            cov = HeatKernelCovariance(spectrum, t=t, scale_divisor=1.0)
            assert np.allclose(cov.block([0, 1], [0, 1]), expected, atol=1e-12)

    def test_exact_transpose_symmetry(self):
        cov = HeatKernelCovariance(_spectrum(), t=0.7, scale_divisor=0.04)
        rows, cols = np.array([3, 10, 42, 7]), np.array([0, 5, 61])
        assert np.array_equal(cov.block(cols, rows), cov.block(rows, cols).T)
        principal = cov.block(rows, rows)
        assert np.array_equal(principal, principal.T)

    def test_principal_block_psd(self):
        cov = HeatKernelCovariance(_spectrum(seed=1), t=0.3, scale_divisor=0.04)
        block = cov.block(np.arange(40), np.arange(40))
        eigenvalues = np.linalg.eigvalsh(block)
        assert eigenvalues.min() >= -1e-8 * eigenvalues.max()
        assert np.all(cov.diagonal(np.arange(80)) > 0)

    def test_trace_decreases_in_t(self):
        spectrum = _spectrum(seed=2)
        everyone = np.arange(spectrum.n)
        traces = [HeatKernelCovariance(spectrum, t=t).diagonal(everyone).sum() for t in (0.01, 0.1, 1.0, 10.0)]
        assert all(a > b for a, b in zip(traces, traces[1:]))

    def test_blocks_match_dense_assembly(self):
        spectrum = _spectrum(seed=3)
        cov = HeatKernelCovariance(spectrum, t=0.5, scale_divisor=0.04)
        dense = dense_covariance(spectrum, 0.5, 0.04)
        rows, cols = np.arange(0, 80, 3), np.arange(5, 60)
        assert np.allclose(covariance_block(cov, rows, cols), dense[np.ix_(rows, cols)], atol=1e-12)
        assert np.allclose(cov.diagonal(rows), np.diag(dense)[rows], atol=1e-12)

    def test_with_t_keeps_spectrum(self):
        cov = HeatKernelCovariance(_spectrum(), t=1.0, scale_divisor=2.0)
        other = cov.with_t(4.0)
        assert other.spectrum is cov.spectrum
        assert other.scale_divisor == 2.0
        assert other.t == 4.0

    def test_invalid_arguments(self):
        spectrum = _spectrum()
        with pytest.raises(ValueError):
            HeatKernelCovariance(spectrum, t=0.0)
        with pytest.raises(ValueError):
            HeatKernelCovariance(spectrum, t=1.0, scale_divisor=-1.0)
        with pytest.raises(ValueError):
            HeatKernelCovariance(spectrum, t=1.0).block([0], [spectrum.n])


class TestJitter:
    """Test relative diagonal jitter."""

    def test_zero_level_is_identity(self):
        block = np.array([[2.0, 1.0], [1.0, 3.0]])
        assert np.array_equal(add_jitter(block, 0.0), block)

    def test_shift_relative_to_trace(self):
        block = np.array([[2.0, 1.0], [1.0, 4.0]])
        shifted = add_jitter(block, 1e-3)
        assert np.allclose(shifted - block, 3e-3 * np.eye(2), rtol=1e-12)
        assert np.allclose(np.linalg.eigvalsh(shifted), np.linalg.eigvalsh(block) + 3e-3, rtol=1e-9)

    def test_non_square_rejected(self):
        with pytest.raises(ValueError):
            add_jitter(np.ones((2, 3)), 1e-10)


class TestBlockDump:
    """Test CSV export of covariance blocks."""

    def test_triples_written(self, tmp_path):
        cov = HeatKernelCovariance(_spectrum(), t=1.0)
        path = dump_block_csv(cov, [0, 1, 2], [4, 5], tmp_path / "block.csv")
        with open(path, newline='') as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["row", "col", "value"]
        assert len(rows) == 1 + 6
        assert [r[:2] for r in rows[1:4]] == [["0", "4"], ["0", "5"], ["1", "4"]]
        assert float(rows[1][2]) == pytest.approx(cov.block([0], [4])[0, 0], rel=1e-12)
