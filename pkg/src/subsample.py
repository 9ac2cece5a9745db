"""Induced point selection: random sampling, Lloyd k-means and mini-batch k-means."""
from dataclasses import dataclass, field
from typing import Optional, Tuple
import numpy as np
from scipy.spatial.distance import cdist
from sklearn.cluster import kmeans_plusplus
from src.config import (
    CHUNK_ROWS, KMEANS_MAX_ITER, KMEANS_TOL_FACTOR, MINIBATCH_SIZE, MINIBATCH_ITERS
)
from src.data_loader import PointCloud
from src.logging_config import logger

METHODS = ("random", "kmeans", "minibatch")


@dataclass(frozen=True)
class InducedPointSet:
    """s landmarks with their nearest-assignment map and occupancy counts."""
    centers: np.ndarray
    counts: np.ndarray
    assignment: np.ndarray
    method: str
    objective_history: Tuple[float, ...] = field(default=())

    @property
    def s(self) -> int:
        return self.centers.shape[0]


def nearest_centers(
    points: np.ndarray,
    centers: np.ndarray,
    k: int = 1,
    chunk_rows: int = CHUNK_ROWS
) -> Tuple[np.ndarray, np.ndarray]:
    """Indices and squared distances of the k nearest centers for every point.

    Ties go to the smaller center index.
    """
    n = points.shape[0]
    k = min(k, centers.shape[0])
    indices = np.empty((n, k), dtype=np.int64)
    sq_dists = np.empty((n, k))
    for start in range(0, n, chunk_rows):
        stop = min(start + chunk_rows, n)
        d = cdist(points[start:stop], centers, "sqeuclidean")
        if k == 1:
            idx = np.argmin(d, axis=1)[:, None]
        else:
            idx = np.argsort(d, axis=1, kind="stable")[:, :k]
        indices[start:stop] = idx
        sq_dists[start:stop] = np.take_along_axis(d, idx, axis=1)
    return indices, sq_dists


def kmeans_objective(points: np.ndarray, centers: np.ndarray) -> float:
    """Within-cluster sum of squares under the nearest-center rule."""
    _, sq = nearest_centers(points, centers)
    return float(sq.sum())


def induced_from_centers(
    cloud: PointCloud,
    centers: np.ndarray,
    method: str,
    objective_history: Tuple[float, ...] = ()
) -> InducedPointSet:
    """Assign every point to its nearest center and drop empty centers."""
    centers = np.asarray(centers, dtype=float)
    idx, _ = nearest_centers(cloud.points, centers)
    assignment = idx[:, 0]
    counts = np.bincount(assignment, minlength=centers.shape[0])
    keep = counts > 0
    if not np.all(keep):
        logger.warning(f"Dropping {int((~keep).sum())} empty landmark(s)")
        remap = np.cumsum(keep) - 1
        centers, counts, assignment = centers[keep], counts[keep], remap[assignment]
    centers = centers.copy()
    for arr in (centers, counts, assignment):
        arr.setflags(write=False)
    return InducedPointSet(
        centers=centers,
        counts=counts,
        assignment=assignment,
        method=method,
        objective_history=tuple(objective_history),
    )


def _check_s(cloud: PointCloud, s: int):
    if not 1 <= s <= cloud.n:
        raise ValueError(f"s must lie in [1, n={cloud.n}], got {s}")


def random_subsample(cloud: PointCloud, s: int, seed: int) -> InducedPointSet:
    """s distinct cloud points drawn uniformly without replacement."""
    _check_s(cloud, s)
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(cloud.n, size=s, replace=False))
    return induced_from_centers(cloud, cloud.points[chosen], "random")


def _plusplus_init(points: np.ndarray, s: int, seed: int) -> np.ndarray:
    centers, _ = kmeans_plusplus(points, n_clusters=s, random_state=seed % (2 ** 32))
    return centers


def kmeans_lloyd(
    cloud: PointCloud,
    s: int,
    max_iter: int = KMEANS_MAX_ITER,
    tol: Optional[float] = None,
    seed: int = 0
) -> InducedPointSet:
    """Lloyd iterations from a k-means++ start.

    An empty cluster is re-seeded at the point farthest from its own center.
    """
    _check_s(cloud, s)
    points = cloud.points
    if tol is None:
        tol = KMEANS_TOL_FACTOR * cloud.diameter()

    centers = _plusplus_init(points, s, seed)
    history = []
    for iteration in range(max_iter):
        idx, sq = nearest_centers(points, centers)
        labels, sq = idx[:, 0], sq[:, 0]
        counts = np.bincount(labels, minlength=s)

        empty = np.flatnonzero(counts == 0)
        if empty.size:
            # farthest points, one per empty cluster
            far = np.argsort(-sq, kind="stable")[:empty.size]
            labels = labels.copy()
            sq = sq.copy()
            labels[far] = empty
            sq[far] = 0.0
            counts = np.bincount(labels, minlength=s)
            logger.warning(f"k-means: re-seeded {empty.size} empty cluster(s) at iteration {iteration}")
        history.append(float(sq.sum()))

        sums = np.zeros_like(centers)
        np.add.at(sums, labels, points)
        occupied = counts[:, None] > 0
        new_centers = np.where(occupied, sums / np.maximum(counts, 1)[:, None], centers)
        shift = float(np.max(np.linalg.norm(new_centers - centers, axis=1)))
        centers = new_centers
        if shift < tol:
            break

    history.append(kmeans_objective(points, centers))
    logger.info(f"k-means: s={s}, iterations={len(history) - 1}, objective={history[-1]:.6g}")
    return induced_from_centers(cloud, centers, "kmeans", tuple(history))


def minibatch_kmeans(
    cloud: PointCloud,
    s: int,
    batch: int,
    iters: int,
    seed: int = 0
) -> InducedPointSet:
    """Mini-batch k-means with per-center learning rate 1/(times seen)."""
    _check_s(cloud, s)
    if batch < 1:
        raise ValueError(f"batch must be at least 1, got {batch}")
    points = cloud.points
    n = cloud.n
    rng = np.random.default_rng(seed)

    centers = _plusplus_init(points, s, seed)
    seen = np.zeros(s)
    for _ in range(iters):
        sample = rng.choice(n, size=batch, replace=batch > n)
        batch_points = points[sample]
        labels = nearest_centers(batch_points, centers)[0][:, 0]
        hits = np.bincount(labels, minlength=s).astype(float)
        sums = np.zeros_like(centers)
        np.add.at(sums, labels, batch_points)
        # sequential 1/v updates within a batch collapse to a running mean
        touched = hits > 0
        total = seen[touched] + hits[touched]
        centers[touched] = (seen[touched, None] * centers[touched] + sums[touched]) / total[:, None]
        seen[touched] = total

    objective = kmeans_objective(points, centers)
    logger.info(f"mini-batch k-means: s={s}, batch={batch}, iters={iters}, objective={objective:.6g}")
    return induced_from_centers(cloud, centers, "minibatch", (objective,))


def subsample(cloud: PointCloud, s: int, method: str, seed: int, **options) -> InducedPointSet:
    """Dispatch to the configured subsampling method."""
    if method == "random":
        return random_subsample(cloud, s, seed)
    if method == "kmeans":
        return kmeans_lloyd(
            cloud, s,
            max_iter=options.get("max_iter") or KMEANS_MAX_ITER,
            seed=seed,
        )
    if method == "minibatch":
        return minibatch_kmeans(
            cloud, s,
            batch=options.get("batch") or min(MINIBATCH_SIZE, cloud.n),
            iters=options.get("iters") or MINIBATCH_ITERS,
            seed=seed,
        )
    raise ValueError(f"Unknown subsampling method: {method}. Available: {list(METHODS)}")
