import numpy as np
import pytest
from src.csv_processor import save_dataset_csv
from src.data_loader import (
    CIRCLE_RADII, Dataset, PointCloud, generate_concentric_circles, generate_spiral,
    load_csv_dataset, spiral_arc_length, split_labeled
)
from src.exceptions import DatasetParseError, EmptyLabelsError


def _write(path, text):
    path.write_text(text, encoding='utf-8')
    return str(path)


class TestCsvLoading:
    """Test CSV point cloud loading."""

    def test_labeled_prefix(self, tmp_path):
        path = _write(tmp_path / "d.csv", "x1,x2,label\n0,0,1\n1,0,0\n2,0,\n")
        dataset = load_csv_dataset(path, "classification")
        assert dataset.n == 3
        assert dataset.p == 2
        assert dataset.m == 2
        assert dataset.labels.tolist() == [1.0, 0.0]

    def test_all_labeled(self, tmp_path):
        path = _write(tmp_path / "d.csv", "x1,label\n0,1.5\n1,2.5\n")
        dataset = load_csv_dataset(path, "regression")
        assert dataset.m == dataset.n == 2

    def test_non_numeric_coordinate_reports_row(self, tmp_path):
        rows = ["x1,x2,label"] + [f"{i},0,1" for i in range(6)] + ["abc,0,1"]
        path = _write(tmp_path / "d.csv", "\n".join(rows) + "\n")
        with pytest.raises(DatasetParseError) as exc:
            load_csv_dataset(path, "classification")
        assert exc.value.row == 7
        assert "row 7" in str(exc.value)

    @pytest.mark.parametrize("bad_row", ["nan,0,1", "0,inf,1", "0,0,nan", "-inf,0,"])
    def test_non_finite_value_reports_row(self, tmp_path, bad_row):
        rows = ["x1,x2,label", "0,0,1", "1,0,0", bad_row]
        path = _write(tmp_path / "d.csv", "\n".join(rows) + "\n")
        with pytest.raises(DatasetParseError) as exc:
            load_csv_dataset(path, "classification")
        assert exc.value.row == 3

    def test_no_labels(self, tmp_path):
        path = _write(tmp_path / "d.csv", "x1,label\n0,\n1,\n")
        with pytest.raises(EmptyLabelsError):
            load_csv_dataset(path, "regression")

    def test_labeled_after_unlabeled(self, tmp_path):
        path = _write(tmp_path / "d.csv", "x1,label\n0,1\n1,\n2,0\n")
        with pytest.raises(DatasetParseError) as exc:
            load_csv_dataset(path, "classification")
        assert exc.value.row == 3

    def test_wrong_width(self, tmp_path):
        path = _write(tmp_path / "d.csv", "x1,x2,label\n0,0,1\n1,1\n")
        with pytest.raises(DatasetParseError):
            load_csv_dataset(path, "classification")

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_csv_dataset(str(tmp_path / "missing.csv"), "regression")

    def test_save_then_load_preserves_values(self, tmp_path):
        dataset = generate_spiral(30, 10, 0.1, seed=4)
        path = str(tmp_path / "spiral.csv")
        save_dataset_csv(dataset, path)
        loaded = load_csv_dataset(path, "regression")
        assert np.array_equal(loaded.cloud.points, dataset.cloud.points)
        assert np.array_equal(loaded.labels, dataset.labels)


class TestDataset:
    """Test dataset invariants."""

    def test_classification_labels_checked(self):
        with pytest.raises(ValueError):
            Dataset(cloud=PointCloud(np.zeros((3, 1))), labels=[0.5], task="classification")

    def test_m_exceeding_n_rejected(self):
        with pytest.raises(ValueError):
            Dataset(cloud=PointCloud(np.zeros((1, 1))), labels=[1.0, 0.0], task="regression")

    def test_non_finite_points_rejected(self):
        with pytest.raises(ValueError):
            PointCloud(np.array([[0.0], [np.nan]]))

    def test_split_labeled(self):
        dataset = generate_concentric_circles(12, 5, seed=0)
        labeled, unlabeled = split_labeled(dataset)
        assert list(labeled) == list(range(5))
        assert list(unlabeled) == list(range(5, 12))

    def test_arrays_are_read_only(self):
        dataset = generate_concentric_circles(12, 5, seed=0)
        with pytest.raises(ValueError):
            dataset.cloud.points[0, 0] = 1.0


class TestConcentricCircles:
    """Test the six-circle classification generator."""

    def test_points_lie_on_circles_with_alternating_class(self):
        dataset = generate_concentric_circles(600, 60, seed=1)
        norms = np.linalg.norm(dataset.cloud.points, axis=1)
        radii = np.asarray(CIRCLE_RADII)
        nearest = np.argmin(np.abs(norms[:, None] - radii[None, :]), axis=1)
        assert np.max(np.abs(norms - radii[nearest])) < 1e-12
        expected = np.where(nearest % 2 == 0, 1.0, 0.0)
        assert np.array_equal(dataset.truth, expected)
        assert np.array_equal(dataset.labels, expected[:60])

    def test_balanced_classes(self):
        dataset = generate_concentric_circles(3000, 50, seed=0)
        assert int(dataset.truth.sum()) == 1500

    def test_six_points(self):
        dataset = generate_concentric_circles(6, 6, seed=0)
        norms = np.sort(np.linalg.norm(dataset.cloud.points, axis=1))
        assert np.allclose(norms, CIRCLE_RADII, atol=1e-12)

    def test_deterministic(self):
        a = generate_concentric_circles(120, 20, seed=9)
        b = generate_concentric_circles(120, 20, seed=9)
        assert np.array_equal(a.cloud.points, b.cloud.points)
        assert np.array_equal(a.labels, b.labels)

    def test_n_must_be_multiple_of_six(self):
        with pytest.raises(ValueError):
            generate_concentric_circles(100, 10, seed=0)


class TestSpiral:
    """Test the spiral regression generator."""

    def test_noiseless_response_is_angle(self):
        dataset = generate_spiral(200, 20, 0.0, seed=2)
        theta = 6.0 * np.pi * np.linalg.norm(dataset.cloud.points, axis=1)
        assert np.allclose(dataset.truth, theta, rtol=1e-12, atol=0)
        assert np.all((dataset.truth >= np.pi) & (dataset.truth <= 6.0 * np.pi))

    def test_two_points(self):
        dataset = generate_spiral(2, 2, 0.1, seed=0)
        assert dataset.n == dataset.m == 2

    def test_arc_length_exceeds_euclidean_gap(self):
        a = np.array([-1.0 / 6.0, 0.0])
        b = np.array([-0.5, 0.0])
        assert np.linalg.norm(a - b) == pytest.approx(1.0 / 3.0)
        assert spiral_arc_length(np.pi, 3 * np.pi) >= 2.0 * np.pi / 3.0

    def test_negative_noise_rejected(self):
        with pytest.raises(ValueError):
            generate_spiral(10, 2, -1.0, seed=0)
