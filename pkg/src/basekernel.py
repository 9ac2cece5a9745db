"""Sparse n x s base kernels between the point cloud and the induced points."""
from dataclasses import dataclass
from typing import Optional, Tuple
import numpy as np
from scipy.sparse import csr_matrix
from src.config import CHUNK_ROWS, LAE_MAX_ITER, LAE_RIDGE, LAE_TOL
from src.data_loader import PointCloud
from src.logging_config import logger
from src.schemas import KernelConfig
from src.subsample import InducedPointSet, nearest_centers

# n x s row-sparse nonnegative matrix (K*, A or Z), canonical CSR with sorted columns
SparseCrossMatrix = csr_matrix


@dataclass(frozen=True)
class LandmarkNeighbors:
    """The r nearest landmarks of every point, nearest first. Independent of epsilon."""
    indices: np.ndarray
    sq_dists: np.ndarray

    @property
    def r(self) -> int:
        return self.indices.shape[1]


def landmark_neighbors(cloud: PointCloud, induced: InducedPointSet, r: int) -> LandmarkNeighbors:
    if not 1 <= r <= induced.s:
        raise ValueError(f"r must lie in [1, s={induced.s}], got {r}")
    indices, sq_dists = nearest_centers(cloud.points, induced.centers, k=r)
    return LandmarkNeighbors(indices=indices, sq_dists=sq_dists)


def se_value(x: np.ndarray, u: np.ndarray, epsilon: float) -> float:
    """Squared-exponential similarity exp(-||x - u||^2 / (4 eps^2))."""
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    diff = np.asarray(x, dtype=float) - np.asarray(u, dtype=float)
    return float(np.exp(-np.sum(diff * diff) / (4.0 * epsilon ** 2)))


def _assemble(indices: np.ndarray, values: np.ndarray, n_cols: int) -> SparseCrossMatrix:
    """CSR matrix from per-row (column, value) pairs; zero values are dropped."""
    n, r = indices.shape
    order = np.argsort(indices, axis=1, kind="stable")
    cols = np.take_along_axis(indices, order, axis=1).ravel()
    vals = np.take_along_axis(values, order, axis=1).ravel()
    keep = vals != 0.0
    row_ids = np.repeat(np.arange(n), r)[keep]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(row_ids, minlength=n), out=indptr[1:])
    matrix = csr_matrix((vals[keep], cols[keep], indptr), shape=(n, n_cols))
    matrix.has_sorted_indices = True
    return matrix


def sparse_se_cross_kernel(
    cloud: PointCloud,
    induced: InducedPointSet,
    config: KernelConfig,
    neighbors: Optional[LandmarkNeighbors] = None
) -> SparseCrossMatrix:
    """K*: squared-exponential values on the r nearest landmarks of each point."""
    if config.kind != "se":
        raise ValueError(f"sparse_se_cross_kernel needs kind='se', got {config.kind!r}")
    if neighbors is None:
        neighbors = landmark_neighbors(cloud, induced, config.r)
    values = np.exp(-neighbors.sq_dists / (4.0 * config.epsilon ** 2))
    tiny = np.finfo(float).tiny
    if np.any(values[:, 0] < tiny):
        # underflow at the nearest landmark would leave an empty row
        logger.warning(f"SE kernel underflow at eps={config.epsilon:.3g}; flooring nearest entries")
        values[:, 0] = np.maximum(values[:, 0], tiny)
    return _assemble(neighbors.indices, values, induced.s)


def simplex_project(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of a vector onto the probability simplex."""
    v = np.asarray(v, dtype=float)
    return _project_rows(v[None, :])[0]


def _project_rows(V: np.ndarray) -> np.ndarray:
    """Row-wise sort-and-threshold projection onto the probability simplex."""
    r = V.shape[1]
    U = -np.sort(-V, axis=1)
    css = np.cumsum(U, axis=1) - 1.0
    ks = np.arange(1, r + 1)
    support = U - css / ks > 0
    rho = r - np.argmax(support[:, ::-1], axis=1)
    theta = css[np.arange(V.shape[0]), rho - 1] / rho
    return np.maximum(V - theta[:, None], 0.0)


def lae_weights(
    points: np.ndarray,
    local: np.ndarray,
    max_iter: int = LAE_MAX_ITER,
    tol: float = LAE_TOL,
    ridge: float = LAE_RIDGE,
    return_history: bool = False
):
    """Accelerated projected gradient for min ||x - sum_j w_j u_j||^2 over the simplex.

    `points` is b x p, `local` is b x r x p (nearest landmark first). Momentum
    restarts whenever a step would increase the objective, so accepted iterates
    never increase it. With `return_history` the per-iteration objective values
    (iterations x b) are returned as well.
    """
    b, r, _ = local.shape
    gram = np.einsum("brp,bqp->brq", local, local) + ridge * np.eye(r)
    linear = np.einsum("brp,bp->br", local, points)
    lipschitz = np.linalg.eigvalsh(gram)[:, -1][:, None]

    def grad(W, rows):
        return np.einsum("brq,bq->br", gram[rows], W) - linear[rows]

    def objective(W, rows):
        return 0.5 * np.einsum("br,brq,bq->b", W, gram[rows], W) - np.einsum("br,br->b", W, linear[rows])

    everyone = np.arange(b)
    W = np.zeros((b, r))
    W[:, 0] = 1.0
    W_prev = W.copy()
    momentum = np.ones(b)
    f_W = objective(W, everyone)
    active = np.ones(b, dtype=bool)
    history = [f_W.copy()]

    for _ in range(max_iter):
        a = np.flatnonzero(active)
        if a.size == 0:
            break
        Wa, L = W[a], lipschitz[a]
        next_momentum = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * momentum[a] ** 2))
        beta = ((momentum[a] - 1.0) / next_momentum)[:, None]
        Y = Wa + beta * (Wa - W_prev[a])
        candidate = _project_rows(Y - grad(Y, a) / L)
        f_candidate = objective(candidate, a)

        # restart: plain projected gradient step from the current iterate
        worse = np.flatnonzero(f_candidate > f_W[a])
        if worse.size:
            rows = a[worse]
            candidate[worse] = _project_rows(Wa[worse] - grad(Wa[worse], rows) / L[worse])
            f_candidate[worse] = objective(candidate[worse], rows)
            next_momentum[worse] = 1.0
            # rounding can still leave the step marginally worse; stay put then
            stuck = worse[f_candidate[worse] > f_W[rows]]
            candidate[stuck] = Wa[stuck]
            f_candidate[stuck] = f_W[a[stuck]]

        W_prev[a] = Wa
        W[a] = candidate
        f_W[a] = f_candidate
        momentum[a] = next_momentum

        mapped = _project_rows(candidate - grad(candidate, a) / L)
        pg_norm = L[:, 0] * np.linalg.norm(candidate - mapped, axis=1)
        active[a[pg_norm < tol]] = False
        if return_history:
            history.append(f_W.copy())

    W = np.where(W < 1e-12, 0.0, W)
    W /= W.sum(axis=1, keepdims=True)
    if return_history:
        return W, np.array(history)
    return W


def lae_cross_kernel(
    cloud: PointCloud,
    induced: InducedPointSet,
    r: int,
    max_iter: int = LAE_MAX_ITER,
    tol: float = LAE_TOL,
    neighbors: Optional[LandmarkNeighbors] = None,
    chunk_rows: int = CHUNK_ROWS
) -> SparseCrossMatrix:
    """K^lae: convex reconstruction weights of each point from its r nearest landmarks."""
    if neighbors is None:
        neighbors = landmark_neighbors(cloud, induced, r)
    n = cloud.n
    weights = np.empty((n, neighbors.r))
    for start in range(0, n, chunk_rows):
        stop = min(start + chunk_rows, n)
        local = induced.centers[neighbors.indices[start:stop]]
        weights[start:stop] = lae_weights(cloud.points[start:stop], local, max_iter=max_iter, tol=tol)
    logger.info(f"LAE kernel: n={n}, r={neighbors.r}, nnz={int(np.count_nonzero(weights))}")
    return _assemble(neighbors.indices, weights, induced.s)


def cross_kernel(
    cloud: PointCloud,
    induced: InducedPointSet,
    config: KernelConfig,
    neighbors: Optional[LandmarkNeighbors] = None
) -> SparseCrossMatrix:
    """Dispatch on the base kernel kind."""
    if config.kind == "se":
        return sparse_se_cross_kernel(cloud, induced, config, neighbors)
    return lae_cross_kernel(cloud, induced, config.r, neighbors=neighbors)


def median_landmark_distance(neighbors: LandmarkNeighbors) -> float:
    """Median distance from points to their r-th nearest landmark (positive part)."""
    d = np.sqrt(neighbors.sq_dists[:, -1])
    positive = d[d > 0]
    return float(np.median(positive)) if positive.size else 0.0


def epsilon_grid(neighbors: LandmarkNeighbors, exponents, fallback: float) -> Tuple[float, ...]:
    """{2^k eps0} around the median r-th-nearest-landmark distance."""
    eps0 = median_landmark_distance(neighbors) or fallback
    return tuple(float(eps0 * 2.0 ** k) for k in sorted(exponents))
