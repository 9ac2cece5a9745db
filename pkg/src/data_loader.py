import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple
import numpy as np
from src.exceptions import DatasetParseError, EmptyLabelsError
from src.logging_config import logger

TASKS = ("regression", "classification")


@dataclass(frozen=True)
class PointCloud:
    """n x p array of ambient coordinates."""
    points: np.ndarray

    def __post_init__(self):
        points = np.array(self.points, dtype=float)
        if points.ndim != 2 or points.shape[0] < 1 or points.shape[1] < 1:
            raise ValueError(f"points must be a non-empty n x p array, got shape {points.shape}")
        if not np.all(np.isfinite(points)):
            raise ValueError("points must be finite")
        points.setflags(write=False)
        object.__setattr__(self, "points", points)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def p(self) -> int:
        return self.points.shape[1]

    def diameter(self) -> float:
        """Bounding-box diagonal, an upper bound on the cloud diameter."""
        span = self.points.max(axis=0) - self.points.min(axis=0)
        return float(np.linalg.norm(span))


@dataclass(frozen=True)
class Dataset:
    """Point cloud whose first m points carry observed labels.

    `truth` optionally holds the response for all n points (synthetic data) and
    is only ever used for evaluation.
    """
    cloud: PointCloud
    labels: np.ndarray
    task: str
    truth: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}, got {self.task!r}")
        labels = np.array(self.labels, dtype=float).ravel()
        if labels.size < 1:
            raise EmptyLabelsError("dataset needs at least one labeled point")
        if labels.size > self.cloud.n:
            raise ValueError(f"m ({labels.size}) exceeds n ({self.cloud.n})")
        if self.task == "classification" and not np.all(np.isin(labels, (0.0, 1.0))):
            raise ValueError("classification labels must be 0 or 1")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        if self.truth is not None:
            truth = np.array(self.truth, dtype=float).ravel()
            if truth.size != self.cloud.n:
                raise ValueError("truth must have one entry per point")
            truth.setflags(write=False)
            object.__setattr__(self, "truth", truth)

    @property
    def n(self) -> int:
        return self.cloud.n

    @property
    def m(self) -> int:
        return self.labels.size

    @property
    def p(self) -> int:
        return self.cloud.p


def split_labeled(dataset: Dataset) -> Tuple[range, range]:
    """Index ranges of the labeled prefix and the unlabeled remainder."""
    return range(0, dataset.m), range(dataset.m, dataset.n)


def load_csv_dataset(file_path: str, task: str) -> Dataset:
    """Load a point cloud from CSV.

    The header is `x1,...,xp[,label]`. Labeled rows come first; an empty label
    field marks the row unlabeled. Rows are numbered from 1 after the header.
    """
    path = Path(file_path)
    if not path.is_file():
        raise FileNotFoundError(f"dataset not found: {file_path}")

    with open(path, 'r', encoding='utf-8', newline='') as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetParseError(0, "empty file")
        header = [h.strip() for h in header]
        has_label = bool(header) and header[-1].lower() == "label"
        width = len(header)
        p = width - 1 if has_label else width
        if p < 1:
            raise DatasetParseError(0, "header declares no coordinate columns")

        points, labels = [], []
        seen_unlabeled = False
        for row_index, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != width:
                raise DatasetParseError(row_index, f"expected {width} columns, got {len(row)}")
            try:
                coords = [float(v) for v in row[:p]]
            except ValueError:
                raise DatasetParseError(row_index, "non-numeric coordinate")
            if not np.all(np.isfinite(coords)):
                raise DatasetParseError(row_index, "non-finite coordinate")
            points.append(coords)
            label_field = row[p].strip() if has_label else ""
            if label_field == "":
                seen_unlabeled = True
                continue
            if seen_unlabeled:
                raise DatasetParseError(row_index, "labeled row after an unlabeled row")
            try:
                label = float(label_field)
            except ValueError:
                raise DatasetParseError(row_index, "non-numeric label")
            if not np.isfinite(label):
                raise DatasetParseError(row_index, "non-finite label")
            labels.append(label)

    if not points:
        raise DatasetParseError(0, "no data rows")
    if not labels:
        raise EmptyLabelsError(f"no labeled rows in {file_path}")

    dataset = Dataset(cloud=PointCloud(np.array(points)), labels=np.array(labels), task=task)
    logger.info(f"Loaded dataset from {file_path}: n={dataset.n}, p={dataset.p}, m={dataset.m}")
    return dataset


def _labeled_prefix(n: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """Permutation moving m uniformly chosen indices to the front."""
    labeled = rng.choice(n, size=m, replace=False)
    mask = np.ones(n, dtype=bool)
    mask[labeled] = False
    return np.concatenate([labeled, np.flatnonzero(mask)])


CIRCLE_RADII = (1.0, 2.0, 3.0, 4.0, 5.0, 6.0)


def generate_concentric_circles(n: int, m: int, seed: int) -> Dataset:
    """n/6 points uniform in angle on each of six concentric circles.

    Circles 1, 3, 5 (innermost first) are class 1, circles 2, 4, 6 class 0.
    """
    if n < 6 or n % 6 != 0:
        raise ValueError(f"n must be a positive multiple of 6, got {n}")
    if not 1 <= m <= n:
        raise ValueError(f"m must lie in [1, n], got {m}")

    rng = np.random.default_rng(seed)
    per_circle = n // 6
    points, classes = [], []
    for index, radius in enumerate(CIRCLE_RADII):
        angles = rng.uniform(0.0, 2.0 * np.pi, size=per_circle)
        points.append(radius * np.column_stack([np.cos(angles), np.sin(angles)]))
        classes.append(np.full(per_circle, 1.0 if index % 2 == 0 else 0.0))
    points = np.vstack(points)
    classes = np.concatenate(classes)

    order = _labeled_prefix(n, m, rng)
    points, classes = points[order], classes[order]
    return Dataset(
        cloud=PointCloud(points),
        labels=classes[:m],
        task="classification",
        truth=classes,
    )


SPIRAL_THETA_MIN = np.pi
SPIRAL_THETA_MAX = 6.0 * np.pi


def generate_spiral(n: int, m: int, noise_sd: float, seed: int) -> Dataset:
    """Archimedean spiral (theta/theta_max)(cos theta, sin theta) with response theta + noise."""
    if n < 2:
        raise ValueError(f"n must be at least 2, got {n}")
    if not 1 <= m <= n:
        raise ValueError(f"m must lie in [1, n], got {m}")
    if noise_sd < 0:
        raise ValueError(f"noise_sd must be non-negative, got {noise_sd}")

    rng = np.random.default_rng(seed)
    theta = rng.uniform(SPIRAL_THETA_MIN, SPIRAL_THETA_MAX, size=n)
    radius = theta / SPIRAL_THETA_MAX
    points = np.column_stack([radius * np.cos(theta), radius * np.sin(theta)])
    response = theta + noise_sd * rng.standard_normal(n)

    order = _labeled_prefix(n, m, rng)
    points, response = points[order], response[order]
    return Dataset(
        cloud=PointCloud(points),
        labels=response[:m],
        task="regression",
        truth=response,
    )


def spiral_arc_length(theta_a: float, theta_b: float) -> float:
    """Arc length along the spiral between two generating angles."""
    a = 1.0 / SPIRAL_THETA_MAX

    def primitive(theta):
        return 0.5 * a * (theta * np.sqrt(1.0 + theta ** 2) + np.arcsinh(theta))

    low, high = sorted((theta_a, theta_b))
    return float(primitive(high) - primitive(low))
