import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional
from src.config import THREADS
from src.data_loader import Dataset, generate_concentric_circles, generate_spiral, load_csv_dataset
from src.exceptions import ReportError
from src.logging_config import logger
from src.metrics import summarize_runs
from src.metrics_report import emit_report
from src.schemas import FLGP_METHODS, BaselineConfig, ExperimentConfig, FLGPConfig, RunRecord
from src.train import FitReport, fit_egp_baseline, fit_flgp, fit_glgp_baseline, fit_nystrom_baseline


@dataclass
class ExperimentResult:
    """Per-run records in (method, repetition) order and the summary rows built from them."""
    runs: List[RunRecord]
    summary: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def failed(self) -> int:
        return sum(1 for r in self.runs if r.status != "ok")


def method_config(config: ExperimentConfig, method: str, seed: int):
    """FLGPConfig or BaselineConfig for one method: shared section, then per-method overrides."""
    overrides = dict(config.overrides.get(method, {}))
    if method in FLGP_METHODS:
        kernel, subsampling = FLGP_METHODS[method]
        merged = {'kernel': kernel, 'subsampling': subsampling, **config.flgp, **overrides, 'seed': seed}
        return FLGPConfig(**merged)
    return BaselineConfig(**{**config.baseline, **overrides, 'seed': seed})


def fit_method(method: str, dataset: Dataset, settings) -> FitReport:
    """Dispatch one method name to its fitting routine."""
    if method in FLGP_METHODS:
        return fit_flgp(dataset, settings, method=method)
    if method == "egp":
        return fit_egp_baseline(dataset, settings)
    if method == "glgp":
        return fit_glgp_baseline(dataset, settings)
    if method == "glgp-nystrom":
        return fit_nystrom_baseline(dataset, settings)
    raise ValueError(f"Unknown method: {method}")


class ExperimentRunner:
    """Runs every method x repetition of an experiment config."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self._csv_dataset: Optional[Dataset] = None

    def seed_for(self, repetition: int) -> int:
        return self.config.seed + repetition

    def make_dataset(self, seed: int) -> Dataset:
        """Fresh dataset for a repetition; shared by all methods through the seed."""
        c = self.config
        if c.experiment == "circles":
            return generate_concentric_circles(c.n, c.m, seed)
        if c.experiment == "spiral":
            return generate_spiral(c.n, c.m, c.noise_sd, seed)
        if self._csv_dataset is None:
            self._csv_dataset = load_csv_dataset(c.dataset_path, c.resolved_task)
        return self._csv_dataset

    def run_single(self, method: str, repetition: int) -> RunRecord:
        """Fit one method on one repetition; failures are captured, not raised."""
        seed = self.seed_for(repetition)
        record = RunRecord(method=method, repetition=repetition, seed=seed)
        start_time = time.perf_counter()
        try:
            dataset = self.make_dataset(seed)
            record.n, record.m = dataset.n, dataset.m
            report = fit_method(method, dataset, method_config(self.config, method, seed))
            record.error_rate = report.metrics.get('error_rate')
            record.nll = report.metrics.get('nll')
            record.rmse = report.metrics.get('rmse')
            record.loglik = report.loglik
            record.epsilon = report.epsilon
            record.t = report.t
            record.sigma = report.sigma
            record.timings = dict(report.timings)
        except Exception as e:
            logger.error(f"Run {method} repetition {repetition} (seed {seed}) failed: {e}")
            record.status = "failed"
            record.error = str(e)
        logger.info(f"{method} repetition {repetition}: {record.status} in {time.perf_counter() - start_time:.2f}s")
        return record

    def run(self, threads: Optional[int] = None) -> ExperimentResult:
        """All runs on a worker pool; results come back in (method, repetition) order."""
        jobs = [(method, rep) for method in self.config.methods for rep in range(self.config.repetitions)]
        workers = max(1, threads or self.config.threads or THREADS)
        if self.config.experiment == "csv":
            self.make_dataset(self.config.seed)
        logger.info(f"Running {len(jobs)} run(s) on {workers} worker(s)")
        if workers == 1:
            runs = [self.run_single(method, rep) for method, rep in jobs]
        else:
            with ThreadPoolExecutor(max_workers=workers) as executor:
                futures = [executor.submit(self.run_single, method, rep) for method, rep in jobs]
                runs = [future.result() for future in futures]
        return ExperimentResult(runs=runs, summary=summarize_runs(runs))


def run_experiment(config: ExperimentConfig, out_dir: Optional[str] = None,
                   threads: Optional[int] = None) -> ExperimentResult:
    """Run the experiment and, with `out_dir`, write runs/timings/summary files."""
    result = ExperimentRunner(config).run(threads=threads)
    if out_dir is not None:
        try:
            emit_report(result.runs, out_dir)
        except ReportError as e:
            logger.error(f"Report not written: {e}")
            raise
    return result
