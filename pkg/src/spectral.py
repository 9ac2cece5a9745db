"""Laplacian eigenpairs from the transition pair, plus the one-step and Nystrom spectra."""
from dataclasses import dataclass
from typing import Optional
import numpy as np
from scipy.linalg import eigh
from scipy.sparse import issparse
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh, svds
from sklearn.metrics.pairwise import rbf_kernel
from src.config import CHUNK_ROWS, DENSE_SVD_MAX_S, ORACLE_GUARD, SVD_TOL
from src.data_loader import PointCloud
from src.exceptions import SizeGuardError, SpectralSolverError
from src.graph import OneStepOperators, TransitionPair, one_step_operators, two_step_dense
from src.logging_config import logger

# singular values below this fraction of the largest are treated as numerically zero
RANK_TOL = 1e-7


@dataclass(frozen=True)
class LaplacianSpectrum:
    """M smallest Laplacian eigenvalues with unit-norm eigenvectors over the cloud.

    `truncated` is set when fewer pairs than requested could be resolved.
    """
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    truncated: bool = False

    def __post_init__(self):
        values = np.array(self.eigenvalues, dtype=float)
        vectors = np.array(self.eigenvectors, dtype=float)
        if vectors.ndim != 2 or vectors.shape[1] != values.size:
            raise ValueError(f"eigenvectors shape {vectors.shape} does not match {values.size} eigenvalues")
        values.setflags(write=False)
        vectors.setflags(write=False)
        object.__setattr__(self, "eigenvalues", values)
        object.__setattr__(self, "eigenvectors", vectors)

    @property
    def M(self) -> int:
        return self.eigenvalues.size

    @property
    def n(self) -> int:
        return self.eigenvectors.shape[0]


def orient_columns(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry (first on ties) is positive."""
    vectors = np.array(vectors, dtype=float)
    if vectors.size == 0:
        return vectors
    pivots = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivots, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def transition_operator(pair: TransitionPair) -> LinearOperator:
    """B = Z Lambda^-1/2 applied matrix-free."""
    inv_sqrt = 1.0 / np.sqrt(pair.lam)

    def apply(W):
        W = np.asarray(W, dtype=float)
        if W.ndim == 1:
            return pair.Z @ (inv_sqrt * W)
        return pair.Z @ (inv_sqrt[:, None] * W)

    def apply_transpose(V):
        V = np.asarray(V, dtype=float)
        if V.ndim == 1:
            return inv_sqrt * (pair.Z.T @ V)
        return inv_sqrt[:, None] * (pair.Z.T @ V)

    return LinearOperator(
        shape=pair.Z.shape,
        matvec=apply,
        rmatvec=apply_transpose,
        matmat=apply,
        rmatmat=apply_transpose,
        dtype=float,
    )


def _spectrum_from_singular(
    B: LinearOperator,
    sigma: np.ndarray,
    right: np.ndarray,
    requested: int
) -> LaplacianSpectrum:
    """Left singular vectors U = B V / sigma, ordered by decreasing sigma."""
    order = np.argsort(-sigma, kind="stable")
    sigma, right = sigma[order], right[:, order]
    resolved = sigma > RANK_TOL * max(float(sigma[0]), 1.0) if sigma.size else np.zeros(0, dtype=bool)
    keep = int(np.count_nonzero(resolved))
    truncated = keep < requested
    if truncated:
        logger.warning(f"Spectrum truncated: {keep} of {requested} eigenpairs above the numerical rank")
    sigma, right = sigma[:keep], right[:, :keep]
    left = B.matmat(right) / sigma
    left /= np.linalg.norm(left, axis=0)
    eigenvalues = np.clip(1.0 - sigma, 0.0, 1.0)
    return LaplacianSpectrum(eigenvalues, orient_columns(left), truncated)


def truncated_svd(
    pair: TransitionPair,
    M: int,
    tol: float = SVD_TOL,
    max_iter: Optional[int] = None,
    seed: int = 0,
    dense_max_s: int = DENSE_SVD_MAX_S
) -> LaplacianSpectrum:
    """Top-M singular triplets of B = Z Lambda^-1/2, returned as lambda = 1 - sigma.

    Small landmark sets use the s x s Gram matrix B^T B, larger ones ARPACK on
    the matrix-free operator. Both go through `transition_operator`.
    """
    n, s = pair.Z.shape
    if not 1 <= M <= s:
        raise ValueError(f"M must lie in [1, s={s}], got {M}")
    B = transition_operator(pair)
    if max_iter is None:
        max_iter = 1000 * M

    if s <= dense_max_s or M >= min(n, s) - 1:
        gram = _gram(pair)
        gram = 0.5 * (gram + gram.T)
        mu, right = eigh(gram)
        mu, right = mu[::-1][:M], right[:, ::-1][:, :M]
        sigma = np.sqrt(np.clip(mu, 0.0, None))
        return _spectrum_from_singular(B, sigma, right, M)

    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(min(n, s))
    try:
        _, sigma, vt = svds(B, k=M, tol=tol, maxiter=max_iter, v0=v0, return_singular_vectors="vh")
    except ArpackNoConvergence as exc:
        residuals = _gram_residuals(B, exc.eigenvalues, exc.eigenvectors)
        raise SpectralSolverError(
            f"truncated SVD did not converge: {len(exc.eigenvalues)} of {M} pairs", residuals
        )
    return _spectrum_from_singular(B, sigma, vt.T, M)


def _gram(pair: TransitionPair) -> np.ndarray:
    """B^T B = Lambda^-1/2 Z^T Z Lambda^-1/2 from the sparse product (s x s)."""
    inv_sqrt = 1.0 / np.sqrt(pair.lam)
    ztz = pair.Z.T @ pair.Z
    ztz = ztz.toarray() if issparse(ztz) else np.asarray(ztz)
    return inv_sqrt[:, None] * ztz * inv_sqrt[None, :]


def _gram_residuals(B: LinearOperator, mu: np.ndarray, vectors: np.ndarray) -> list:
    if vectors is None or len(mu) == 0:
        return []
    image = B.rmatmat(B.matmat(vectors))
    return [float(r) for r in np.linalg.norm(image - vectors * mu, axis=0)]


def dense_eig_oracle(pair: TransitionPair, M: int, guard: int = ORACLE_GUARD) -> LaplacianSpectrum:
    """Reference path: full eigendecomposition of Z Lambda^-1 Z^T."""
    if pair.n > guard:
        raise SizeGuardError(f"dense oracle limited to n <= {guard}, got n={pair.n}")
    if not 1 <= M <= pair.n:
        raise ValueError(f"M must lie in [1, n={pair.n}], got {M}")
    P = two_step_dense(pair)
    P = 0.5 * (P + P.T)
    mu, vectors = eigh(P)
    mu, vectors = mu[::-1][:M], vectors[:, ::-1][:, :M]
    eigenvalues = np.clip(1.0 - np.sqrt(np.clip(mu, 0.0, None)), 0.0, 1.0)
    return LaplacianSpectrum(eigenvalues, orient_columns(vectors))


def one_step_spectrum(ops: OneStepOperators, M: int) -> LaplacianSpectrum:
    """Eigenpairs of I - Zbar through the similar symmetric matrix D^-1/2 Abar D^-1/2.

    Right eigenvectors of Zbar are D^-1/2 w, l2-normalised.
    """
    n = ops.n
    if not 1 <= M <= n:
        raise ValueError(f"M must lie in [1, n={n}], got {M}")
    inv_sqrt = 1.0 / np.sqrt(ops.degree)
    if issparse(ops.Abar) and M < n - 1:
        S = ops.Abar.multiply(inv_sqrt[:, None]).multiply(inv_sqrt[None, :]).tocsr()
        S = 0.5 * (S + S.T)
        mu, w = eigsh(S, k=M, which="LA", v0=np.ones(n))
    else:
        Abar = ops.Abar.toarray() if issparse(ops.Abar) else ops.Abar
        S = inv_sqrt[:, None] * Abar * inv_sqrt[None, :]
        S = 0.5 * (S + S.T)
        mu, w = eigh(S, subset_by_index=[n - M, n - 1])
    order = np.argsort(-mu, kind="stable")
    mu, w = mu[order], w[:, order]
    vectors = inv_sqrt[:, None] * w
    vectors /= np.linalg.norm(vectors, axis=0)
    eigenvalues = np.clip(1.0 - mu, 0.0, None)
    return LaplacianSpectrum(eigenvalues, orient_columns(vectors))


def landmark_degrees(landmarks: np.ndarray, epsilon: float) -> np.ndarray:
    """Row sums of the landmark self-similarity matrix, diagonal included."""
    kernel = rbf_kernel(landmarks, gamma=1.0 / (4.0 * epsilon ** 2))
    kernel = 0.5 * (kernel + kernel.T)
    np.fill_diagonal(kernel, 1.0)
    return kernel.sum(axis=1)


def nystrom_extend(
    points: np.ndarray,
    landmarks: np.ndarray,
    epsilon: float,
    U: np.ndarray,
    mu: np.ndarray,
    chunk_rows: int = CHUNK_ROWS
) -> np.ndarray:
    """v(x) = sum_j z_j(x) u_j / mu with z(x) the row-normalised k(x, l_j) / (d(x) d_j).

    Unnormalised; at a landmark it reproduces the landmark eigenvector entry.
    """
    gamma = 1.0 / (4.0 * epsilon ** 2)
    degree = landmark_degrees(landmarks, epsilon)
    extended = np.empty((points.shape[0], mu.size))
    for start in range(0, points.shape[0], chunk_rows):
        stop = min(start + chunk_rows, points.shape[0])
        K = rbf_kernel(points[start:stop], landmarks, gamma=gamma)
        A = K / (K.sum(axis=1)[:, None] * degree[None, :])
        Z = A / A.sum(axis=1)[:, None]
        extended[start:stop] = (Z @ U) / mu
    return extended


def nystrom_spectrum(
    cloud: PointCloud,
    landmark_index: np.ndarray,
    epsilon: float,
    M: int
) -> LaplacianSpectrum:
    """One-step spectrum on a landmark subset, extended to every cloud point."""
    landmark_index = np.sort(np.asarray(landmark_index))
    landmarks = PointCloud(cloud.points[landmark_index])
    if not 1 <= M <= landmarks.n:
        raise ValueError(f"M must lie in [1, s={landmarks.n}], got {M}")
    inner = one_step_spectrum(one_step_operators(landmarks, epsilon), M)
    mu = 1.0 - inner.eigenvalues

    usable = np.abs(mu) > RANK_TOL
    if not np.all(usable):
        logger.warning(f"Nystrom extension: dropping {int((~usable).sum())} eigenpair(s) with vanishing eigenvalue")
    mu = mu[usable]
    extended = nystrom_extend(cloud.points, landmarks.points, epsilon, inner.eigenvectors[:, usable], mu)
    extended /= np.linalg.norm(extended, axis=0)
    return LaplacianSpectrum(1.0 - mu, orient_columns(extended), not np.all(usable))
