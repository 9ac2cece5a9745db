import numpy as np
import pytest
from scipy.spatial.distance import cdist
from src.data_loader import PointCloud
from src.subsample import (
    induced_from_centers, kmeans_lloyd, kmeans_objective, minibatch_kmeans,
    random_subsample, subsample
)
from tests.conftest import line_cloud


class TestRandomSubsample:
    """Test uniform landmark selection."""

    def test_all_points_selected(self):
        cloud = PointCloud(np.random.default_rng(0).normal(size=(40, 2)))
        induced = random_subsample(cloud, 40, seed=1)
        assert induced.s == 40
        assert np.all(induced.counts == 1)
        assert np.array_equal(induced.assignment, np.arange(40))

    def test_single_landmark(self):
        cloud = PointCloud(np.random.default_rng(0).normal(size=(25, 3)))
        induced = random_subsample(cloud, 1, seed=0)
        assert induced.counts.tolist() == [25]

    def test_landmarks_are_cloud_points(self):
        cloud = PointCloud(np.random.default_rng(2).normal(size=(50, 2)))
        induced = random_subsample(cloud, 10, seed=3)
        distances = cdist(induced.centers, cloud.points)
        assert np.all(distances.min(axis=1) == 0.0)
        assert induced.counts.sum() == 50

    def test_invalid_s(self):
        cloud = line_cloud([0.0, 1.0])
        with pytest.raises(ValueError):
            random_subsample(cloud, 3, seed=0)


class TestInducedFromCenters:
    """Test nearest-center assignment."""

    def test_counts_on_line(self):
        cloud = line_cloud([0.0, 1.0, 10.0])
        induced = induced_from_centers(cloud, np.array([[0.0], [10.0]]), "random")
        assert induced.counts.tolist() == [2, 1]
        assert induced.assignment.tolist() == [0, 0, 1]

    def test_empty_centers_dropped(self):
        cloud = line_cloud([0.0, 1.0, 10.0])
        induced = induced_from_centers(cloud, np.array([[0.0], [100.0], [10.0]]), "kmeans")
        assert induced.s == 2
        assert induced.counts.tolist() == [2, 1]
        assert induced.assignment.tolist() == [0, 0, 1]

    def test_assignment_matches_brute_force(self):
        rng = np.random.default_rng(5)
        cloud = PointCloud(rng.normal(size=(300, 3)))
        induced = kmeans_lloyd(cloud, 20, seed=0)
        expected = np.argmin(cdist(cloud.points, induced.centers), axis=1)
        assert np.array_equal(induced.assignment, expected)
        assert np.array_equal(np.bincount(induced.assignment, minlength=induced.s), induced.counts)


class TestKMeans:
    """Test Lloyd and mini-batch k-means."""

    def test_two_clusters_on_line(self):
        cloud = line_cloud([0.0, 0.1, 9.9, 10.0])
        induced = kmeans_lloyd(cloud, 2, seed=0)
        centers = np.sort(induced.centers[:, 0])
        assert centers == pytest.approx([0.05, 9.95])
        assert induced.counts.tolist() == [2, 2]

    def test_s_equals_n_reaches_zero_objective(self):
        cloud = PointCloud(np.random.default_rng(1).normal(size=(30, 2)))
        induced = kmeans_lloyd(cloud, 30, seed=4)
        assert induced.objective_history[-1] == pytest.approx(0.0, abs=1e-20)

    def test_objective_non_increasing(self):
        rng = np.random.default_rng(7)
        cloud = PointCloud(np.vstack([rng.normal(c, 0.5, size=(60, 2)) for c in (0.0, 4.0, 8.0)]))
        history = np.array(kmeans_lloyd(cloud, 6, seed=2).objective_history)
        assert len(history) >= 2
        assert np.all(np.diff(history) <= 1e-9 * history[0])

    def test_deterministic(self):
        cloud = PointCloud(np.random.default_rng(3).normal(size=(200, 2)))
        a = kmeans_lloyd(cloud, 12, seed=11)
        b = kmeans_lloyd(cloud, 12, seed=11)
        assert np.array_equal(a.centers, b.centers)
        assert np.array_equal(a.assignment, b.assignment)

    def test_minibatch_single_center_is_mean(self):
        cloud = PointCloud(np.random.default_rng(0).normal(size=(50, 2)))
        induced = minibatch_kmeans(cloud, 1, batch=50, iters=5, seed=0)
        assert np.allclose(induced.centers[0], cloud.points.mean(axis=0), atol=1e-12)

    def test_minibatch_close_to_lloyd(self):
        cloud = line_cloud([0.0, 0.1, 9.9, 10.0])
        lloyd = kmeans_objective(cloud.points, kmeans_lloyd(cloud, 2, seed=0).centers)
        mini = kmeans_objective(cloud.points, minibatch_kmeans(cloud, 2, batch=4, iters=200, seed=0).centers)
        assert mini <= 1.05 * lloyd

    def test_dispatch(self):
        cloud = PointCloud(np.random.default_rng(0).normal(size=(60, 2)))
        for method in ("random", "kmeans", "minibatch"):
            induced = subsample(cloud, 5, method, seed=0, batch=30, iters=10)
            assert induced.method == method
            assert induced.counts.sum() == 60
        with pytest.raises(ValueError):
            subsample(cloud, 5, "grid", seed=0)
