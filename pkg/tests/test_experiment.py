import csv
import json
import numpy as np
import pytest
import src.experiment as experiment
from src.csv_processor import load_runs_csv, load_summary_csv
from src.exceptions import FitError, ReportError
from src.experiment import ExperimentRunner, method_config, run_experiment
from src.main import EXIT_CONFIG, EXIT_OK, EXIT_PARTIAL, main
from src.metrics_report import emit_report, format_mean_sd
from src.schemas import RUN_COLUMNS, BaselineConfig, ExperimentConfig, FLGPConfig, RunRecord


def _config(**overrides):
    settings = dict(experiment="circles", methods=["egp"], n=120, m=20, repetitions=2, seed=0)
    settings.update(overrides)
    return ExperimentConfig(**settings)


def _write_config(tmp_path, **overrides):
    settings = dict(experiment="circles", methods=["egp"], n=120, m=20, repetitions=2, seed=0)
    settings.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(settings), encoding='utf-8')
    return str(path)


class TestConfig:
    """Test experiment configuration validation."""

    def test_circles_needs_multiple_of_six(self):
        with pytest.raises(ValueError):
            _config(n=100)

    def test_overrides_must_name_listed_methods(self):
        with pytest.raises(ValueError):
            _config(overrides={"glgp": {"M": 5}})

    def test_flgp_rank_checks(self):
        with pytest.raises(ValueError):
            FLGPConfig(s=10, r=11)
        with pytest.raises(ValueError):
            FLGPConfig(s=10, M=20)
        with pytest.raises(ValueError):
            FLGPConfig(t_bounds=(2.0, 1.0))

    def test_method_config_merges_sections(self):
        config = _config(methods=["skflgp", "glgp"], flgp={"s": 30, "M": 20},
                         overrides={"skflgp": {"M": 10}}, baseline={"M": 15})
        flgp = method_config(config, "skflgp", seed=7)
        assert isinstance(flgp, FLGPConfig)
        assert (flgp.s, flgp.M, flgp.kernel, flgp.subsampling, flgp.seed) == (30, 10, "se", "kmeans", 7)
        baseline = method_config(config, "glgp", seed=7)
        assert isinstance(baseline, BaselineConfig)
        assert baseline.M == 15

    def test_resolved_task(self):
        assert _config().resolved_task == "classification"
        assert _config(experiment="spiral").resolved_task == "regression"


class TestExperimentRunner:
    """Test running method x repetition grids."""

    def test_runs_in_order(self):
        result = ExperimentRunner(_config(methods=["egp", "glgp"])).run(threads=1)
        assert [(r.method, r.repetition) for r in result.runs] == [
            ("egp", 0), ("egp", 1), ("glgp", 0), ("glgp", 1)
        ]
        assert result.failed == 0
        assert all(r.error_rate is not None for r in result.runs)

    def test_thread_pool_matches_sequential(self):
        config = _config(methods=["egp", "glgp"])
        sequential = ExperimentRunner(config).run(threads=1)
        pooled = ExperimentRunner(config).run(threads=3)
        for a, b in zip(sequential.runs, pooled.runs):
            assert (a.method, a.repetition, a.error_rate, a.nll) == (b.method, b.repetition, b.error_rate, b.nll)

    def test_repetitions_share_dataset_across_methods(self):
        runner = ExperimentRunner(_config())
        a = runner.make_dataset(runner.seed_for(1))
        b = runner.make_dataset(runner.seed_for(1))
        assert np.array_equal(a.cloud.points, b.cloud.points)

    def test_failure_is_captured(self, monkeypatch):
        original = experiment.fit_method

        def flaky(method, dataset, settings):
            if method == "glgp":
                raise FitError("no convergence")
            return original(method, dataset, settings)

        monkeypatch.setattr(experiment, "fit_method", flaky)
        result = ExperimentRunner(_config(methods=["egp", "glgp"], repetitions=1)).run()
        assert result.failed == 1
        failed = result.runs[1]
        assert failed.status == "failed"
        assert "no convergence" in failed.error


class TestReports:
    """Test runs/summary file emission."""

    def test_report_files(self, tmp_path):
        run_experiment(_config(), out_dir=str(tmp_path))
        for name in ("runs.csv", "timings.csv", "summary.csv", "summary.md"):
            assert (tmp_path / name).is_file()
        with open(tmp_path / "runs.csv", newline='') as f:
            header = next(csv.reader(f))
        assert header == RUN_COLUMNS

    def test_summary_matches_runs(self, tmp_path):
        run_experiment(_config(repetitions=3), out_dir=str(tmp_path))
        runs = load_runs_csv(str(tmp_path / "runs.csv"))
        summary = {(r['method'], r['metric']): r for r in load_summary_csv(str(tmp_path / "summary.csv"))}
        values = [r.error_rate for r in runs]
        row = summary[("egp", "error_rate")]
        assert row['mean'] == pytest.approx(np.mean(values), abs=1e-12)
        assert row['sd'] == pytest.approx(np.std(values, ddof=1), abs=1e-12)
        assert row['n_runs'] == 3

    def test_runs_file_deterministic(self, tmp_path):
        run_experiment(_config(), out_dir=str(tmp_path / "a"))
        run_experiment(_config(), out_dir=str(tmp_path / "b"))
        assert (tmp_path / "a" / "runs.csv").read_bytes() == (tmp_path / "b" / "runs.csv").read_bytes()

    def test_no_successful_runs(self, tmp_path):
        runs = [RunRecord(method="egp", repetition=0, seed=0, status="failed", error="x")]
        with pytest.raises(ReportError):
            emit_report(runs, str(tmp_path / "out"))
        assert not (tmp_path / "out" / "summary.csv").exists()

    def test_unwritable_file_raises_report_error(self, tmp_path):
        runs = [RunRecord(method="egp", repetition=0, seed=0, status="ok", error_rate=0.1)]
        (tmp_path / "summary.md").mkdir()
        with pytest.raises(ReportError):
            emit_report(runs, str(tmp_path))

    def test_error_rate_shown_in_percent(self):
        assert format_mean_sd("error_rate", 0.1234, 0.01) == "12.3(1.0)"
        assert format_mean_sd("nll", 0.1234, 0.01) == "0.123(0.010)"


class TestCommandLine:
    """Test the heatflow command-line entry point."""

    def test_gen(self, tmp_path):
        out = tmp_path / "circles.csv"
        assert main(["gen", "circles", "--n", "60", "--m", "10", "--out", str(out)]) == EXIT_OK
        lines = out.read_text().splitlines()
        assert lines[0] == "x1,x2,label"
        assert len(lines) == 61

    def test_run_and_evaluate(self, tmp_path):
        config = _write_config(tmp_path)
        out = tmp_path / "report"
        assert main(["run", "--config", config, "--out", str(out)]) == EXIT_OK
        again = tmp_path / "again"
        assert main(["evaluate", "--runs", str(out / "runs.csv"), "--out", str(again)]) == EXIT_OK
        first = load_summary_csv(str(out / "summary.csv"))
        second = load_summary_csv(str(again / "summary.csv"))
        assert [(r['method'], r['metric']) for r in first] == [(r['method'], r['metric']) for r in second]
        for a, b in zip(first, second):
            assert a['mean'] == pytest.approx(b['mean'], abs=1e-12)
            assert a['sd'] == pytest.approx(b['sd'], abs=1e-12)

    def test_invalid_config(self, tmp_path):
        config = _write_config(tmp_path, n=100)
        assert main(["run", "--config", config, "--out", str(tmp_path / "o")]) == EXIT_CONFIG

    def test_missing_config(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "none.json")]) == EXIT_CONFIG

    def test_partial_failure_exit_code(self, tmp_path, monkeypatch):
        original = experiment.fit_method

        def flaky(method, dataset, settings):
            if method == "glgp":
                raise FitError("no convergence")
            return original(method, dataset, settings)

        monkeypatch.setattr(experiment, "fit_method", flaky)
        config = _write_config(tmp_path, methods=["egp", "glgp"], repetitions=1)
        out = tmp_path / "report"
        assert main(["run", "--config", config, "--out", str(out)]) == EXIT_PARTIAL
        assert "failed" in (out / "summary.md").read_text()

    def test_unwritable_runs_file_exit_code(self, tmp_path):
        config = _write_config(tmp_path, repetitions=1)
        out = tmp_path / "report"
        (out / "runs.csv").mkdir(parents=True)
        assert main(["run", "--config", config, "--out", str(out)]) == EXIT_PARTIAL

    def test_evaluate_unwritable_summary(self, tmp_path):
        config = _write_config(tmp_path, repetitions=1)
        out = tmp_path / "report"
        assert main(["run", "--config", config, "--out", str(out)]) == EXIT_OK
        again = tmp_path / "again"
        (again / "summary.csv").mkdir(parents=True)
        assert main(["evaluate", "--runs", str(out / "runs.csv"), "--out", str(again)]) == EXIT_PARTIAL

    def test_evaluate_missing_runs(self, tmp_path):
        assert main(["evaluate", "--runs", str(tmp_path / "runs.csv"), "--out", str(tmp_path)]) == EXIT_PARTIAL

    def test_prior(self, tmp_path):
        config = _write_config(tmp_path, repetitions=1)
        out = tmp_path / "prior.csv"
        assert main(["prior", "--config", config, "--method", "egp", "--reference", "3",
                     "--out", str(out)]) == EXIT_OK
        with open(out, newline='') as f:
            rows = list(csv.DictReader(f))
        assert len(rows) == 120
        reference = [r for r in rows if r['reference'] == "1"]
        assert len(reference) == 1 and reference[0]['index'] == "3"
        assert float(reference[0]['covariance']) == pytest.approx(1.0)

    def test_prior_reference_out_of_range(self, tmp_path):
        config = _write_config(tmp_path, repetitions=1)
        assert main(["prior", "--config", config, "--method", "egp", "--reference", "500",
                     "--out", str(tmp_path / "p.csv")]) == EXIT_CONFIG
