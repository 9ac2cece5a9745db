"""Heat-kernel covariance C = n sum_i exp(-t lambda_i / divisor) v_i v_i^T, served blockwise."""
from dataclasses import dataclass, replace
from pathlib import Path
import numpy as np
from src.config import ORACLE_GUARD
from src.csv_processor import save_block_csv
from src.exceptions import SizeGuardError
from src.logging_config import logger
from src.spectral import LaplacianSpectrum


def _as_index(idx, n: int, name: str) -> np.ndarray:
    idx = np.atleast_1d(np.asarray(idx))
    if idx.size and (idx.dtype.kind not in "iu" or idx.min() < 0 or idx.max() >= n):
        raise ValueError(f"{name} indices must be integers in [0, {n}), got range [{idx.min()}, {idx.max()}]")
    return idx.astype(np.int64, copy=False)


@dataclass(frozen=True)
class HeatKernelCovariance:
    """Virtual n x n covariance; only requested blocks are ever materialised.

    `scale_divisor` is epsilon^2 for squared-exponential graphs and 1 for LAE.
    """
    spectrum: LaplacianSpectrum
    t: float
    scale_divisor: float = 1.0

    def __post_init__(self):
        if self.t <= 0:
            raise ValueError(f"t must be positive, got {self.t}")
        if self.scale_divisor <= 0:
            raise ValueError(f"scale_divisor must be positive, got {self.scale_divisor}")

    @property
    def n(self) -> int:
        return self.spectrum.n

    @property
    def weights(self) -> np.ndarray:
        """n exp(-t lambda / divisor) per eigenpair."""
        return self.n * np.exp(-self.t * self.spectrum.eigenvalues / self.scale_divisor)

    def with_t(self, t: float) -> "HeatKernelCovariance":
        return replace(self, t=t)

    def _factor(self, idx: np.ndarray) -> np.ndarray:
        return self.spectrum.eigenvectors[idx] * np.sqrt(self.weights)

    def block(self, rows, cols) -> np.ndarray:
        """Dense |rows| x |cols| block; block(c, r) is exactly block(r, c).T."""
        rows = _as_index(rows, self.n, "row")
        cols = _as_index(cols, self.n, "col")
        if rows.tobytes() > cols.tobytes():
            return np.ascontiguousarray(self.block(cols, rows).T)
        left = self._factor(rows)
        if np.array_equal(rows, cols):
            product = left @ left.T
            return 0.5 * (product + product.T)
        return left @ self._factor(cols).T

    def diagonal(self, idx) -> np.ndarray:
        idx = _as_index(idx, self.n, "diagonal")
        return np.sum(self._factor(idx) ** 2, axis=1)


def covariance_block(cov: HeatKernelCovariance, rows, cols) -> np.ndarray:
    """Block of C over the given index sets in O(|rows| |cols| M)."""
    return cov.block(rows, cols)


def add_jitter(block: np.ndarray, level: float) -> np.ndarray:
    """block + level * (trace / m) * I."""
    block = np.asarray(block, dtype=float)
    if block.ndim != 2 or block.shape[0] != block.shape[1]:
        raise ValueError(f"jitter needs a square block, got shape {block.shape}")
    if level < 0:
        raise ValueError(f"jitter level must be non-negative, got {level}")
    m = block.shape[0]
    shift = level * np.trace(block) / m
    return block + shift * np.eye(m)


def dense_covariance(spectrum: LaplacianSpectrum, t: float, scale_divisor: float = 1.0,
                     guard: int = ORACLE_GUARD) -> np.ndarray:
    """Full n x n assembly, for cross-checking the blockwise path on small clouds."""
    if spectrum.n > guard:
        raise SizeGuardError(f"dense covariance limited to n <= {guard}, got n={spectrum.n}")
    V = spectrum.eigenvectors
    weights = spectrum.n * np.exp(-t * spectrum.eigenvalues / scale_divisor)
    return (V * weights) @ V.T


def dump_block_csv(cov: HeatKernelCovariance, rows, cols, path: str) -> Path:
    """Write a block as `row,col,value` triples."""
    rows = _as_index(rows, cov.n, "row")
    cols = _as_index(cols, cov.n, "col")
    path = Path(path)
    save_block_csv(rows, cols, cov.block(rows, cols), str(path))
    logger.info(f"Covariance block {rows.size}x{cols.size} written to {path}")
    return path
