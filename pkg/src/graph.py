"""Cross similarity, transition matrices and the one-step graph operators."""
from dataclasses import dataclass
from typing import Optional, Union
import numpy as np
from scipy.sparse import csr_matrix, diags, issparse
from sklearn.metrics.pairwise import rbf_kernel
from sklearn.neighbors import kneighbors_graph
from src.basekernel import SparseCrossMatrix
from src.config import DENSE_GUARD, ZERO_MASS_TOL
from src.data_loader import PointCloud
from src.exceptions import FitError, SizeGuardError
from src.logging_config import logger


@dataclass(frozen=True)
class TransitionPair:
    """Row-stochastic Z (n x s) with column masses Lambda_jj = Z_.j.

    `kept` maps retained columns back to the original landmark indices,
    `dropped` lists landmarks removed for zero column mass.
    """
    Z: SparseCrossMatrix
    lam: np.ndarray
    kept: np.ndarray
    dropped: np.ndarray

    @property
    def n(self) -> int:
        return self.Z.shape[0]

    @property
    def s(self) -> int:
        return self.Z.shape[1]


@dataclass(frozen=True)
class OneStepOperators:
    """Full-graph transition Zbar = row-normalised Abar, with Abar row sums as degree."""
    Zbar: Union[np.ndarray, csr_matrix]
    Abar: Union[np.ndarray, csr_matrix]
    degree: np.ndarray

    @property
    def n(self) -> int:
        return self.Zbar.shape[0]


def _entry_rows(matrix: csr_matrix) -> np.ndarray:
    return np.repeat(np.arange(matrix.shape[0]), np.diff(matrix.indptr))


def cross_similarity(K: SparseCrossMatrix, counts: np.ndarray) -> SparseCrossMatrix:
    """A_ij = n_j K_ij / (K_.j sum_q n_q K_iq) on the sparsity pattern of K."""
    K = csr_matrix(K)
    counts = np.asarray(counts, dtype=float)
    if counts.shape[0] != K.shape[1]:
        raise ValueError(f"counts has {counts.shape[0]} entries for {K.shape[1]} landmarks")
    col_mass = np.asarray(K.sum(axis=0)).ravel()
    row_mass = K @ counts
    empty = np.flatnonzero(col_mass == 0)
    if empty.size:
        logger.warning(f"{empty.size} landmark(s) with zero kernel column mass flagged for dropping")
    cols = K.indices
    rows = _entry_rows(K)
    data = counts[cols] * K.data / (col_mass[cols] * row_mass[rows])
    return csr_matrix((data, cols.copy(), K.indptr.copy()), shape=K.shape)


def row_normalize(A: SparseCrossMatrix, zero_mass_tol: float = ZERO_MASS_TOL) -> TransitionPair:
    """Z = A / A_i. with column masses; zero-mass landmarks are dropped."""
    A = csr_matrix(A)
    kept = np.arange(A.shape[1])
    Z = _normalize_rows(A)
    lam = np.asarray(Z.sum(axis=0)).ravel()
    dropped = np.flatnonzero(lam <= zero_mass_tol)
    if dropped.size:
        logger.warning(f"Dropping {dropped.size} landmark(s) with zero column mass: {dropped.tolist()[:10]}")
        kept = np.flatnonzero(lam > zero_mass_tol)
        Z = _normalize_rows(Z[:, kept])
        lam = np.asarray(Z.sum(axis=0)).ravel()
    return TransitionPair(Z=Z, lam=lam, kept=kept, dropped=dropped)


def _normalize_rows(A: csr_matrix) -> csr_matrix:
    row_sums = np.asarray(A.sum(axis=1)).ravel()
    bad = np.flatnonzero(row_sums <= 0)
    if bad.size:
        raise FitError(f"point {int(bad[0])} has no positive transition to any landmark")
    data = A.data / row_sums[_entry_rows(A)]
    return csr_matrix((data, A.indices.copy(), A.indptr.copy()), shape=A.shape)


def one_step_operators(
    cloud: PointCloud,
    epsilon: float,
    r_nn: Optional[int] = None,
    dense_guard: int = DENSE_GUARD
) -> OneStepOperators:
    """One-step operators over the whole cloud.

    Kbar includes the diagonal self-similarity. Abar_ij = Kbar_ij / (d_i d_j) with
    d the Kbar degrees, Zbar = Abar row-normalised. With `r_nn` the Kbar pattern
    is the symmetrised r_nn-nearest-neighbour graph.
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    gamma = 1.0 / (4.0 * epsilon ** 2)
    if r_nn is None:
        if cloud.n > dense_guard:
            raise SizeGuardError(f"n={cloud.n} exceeds the dense guard {dense_guard}; pass r_nn")
        K = rbf_kernel(cloud.points, gamma=gamma)
        K = 0.5 * (K + K.T)
        np.fill_diagonal(K, 1.0)
        d = K.sum(axis=1)
        Abar = K / np.outer(d, d)
        degree = Abar.sum(axis=1)
        Zbar = Abar / degree[:, None]
    else:
        G = kneighbors_graph(cloud.points, min(r_nn, cloud.n - 1) or 1, mode="distance", include_self=False)
        G.data = np.exp(-gamma * G.data ** 2)
        K = G.maximum(G.T).tocsr()
        K.setdiag(1.0)
        K = csr_matrix(K)
        d = np.asarray(K.sum(axis=1)).ravel()
        inv_d = diags(1.0 / d)
        Abar = csr_matrix(inv_d @ K @ inv_d)
        degree = np.asarray(Abar.sum(axis=1)).ravel()
        Zbar = csr_matrix(diags(1.0 / degree) @ Abar)
    return OneStepOperators(Zbar=Zbar, Abar=Abar, degree=degree)


def two_step_dense(pair: TransitionPair) -> np.ndarray:
    """Dense Z Lambda^-1 Z^T (test oracle scale only)."""
    Z = pair.Z.toarray() if issparse(pair.Z) else np.asarray(pair.Z)
    return (Z / pair.lam) @ Z.T
