"""End-to-end FLGP fitting, hyperparameter search and the EGP / GLGP / Nystrom baselines."""
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple
import numpy as np
from scipy.linalg import LinAlgError
from scipy.optimize import minimize_scalar
from scipy.sparse.linalg import ArpackError
from scipy.spatial.distance import pdist
from src.basekernel import cross_kernel, epsilon_grid, landmark_neighbors
from src.config import JITTER, SEARCH_SWEEPS, SEARCH_TOL
from src.data_loader import Dataset
from src.exceptions import FitError, HeatflowError
from src.gp import (
    EuclideanKernel, KernelSource, LikelihoodSpec, PosteriorSummary, gaussian_marginal_loglik,
    laplace_evidence, predict_posterior
)
from src.graph import cross_similarity, one_step_operators, row_normalize
from src.heatkernel import HeatKernelCovariance, add_jitter
from src.logging_config import logger
from src.metrics import metric_error_rate, metric_nll, metric_rmse
from src.schemas import BaselineConfig, FLGPConfig, KernelConfig, STAGES
from src.spectral import LaplacianSpectrum, nystrom_spectrum, one_step_spectrum, truncated_svd
from src.subsample import nearest_centers, subsample


@dataclass
class FitReport:
    """Chosen hyperparameters, evidence, stage timings and predictions on the unlabeled points."""
    method: str
    task: str
    epsilon: Optional[float]
    t: Optional[float]
    sigma: Optional[float]
    loglik: float
    posterior: PosteriorSummary
    test_index: range
    kernel: KernelSource
    timings: Dict[str, float] = field(default_factory=dict)
    metrics: Dict[str, Optional[float]] = field(default_factory=dict)
    candidates: List[Dict[str, object]] = field(default_factory=list)
    truncated: bool = False


@dataclass(frozen=True)
class SearchResult:
    t: float
    sigma: Optional[float]
    loglik: float


@contextmanager
def _timed(timings: Dict[str, float], stage: str):
    start = time.perf_counter()
    try:
        yield
    finally:
        timings[stage] = timings.get(stage, 0.0) + (time.perf_counter() - start)


def coordinate_search(
    score: Callable[[float, Optional[float]], float],
    t_bounds: Tuple[float, float],
    sigma_bounds: Optional[Tuple[float, float]] = None,
    sweeps: int = SEARCH_SWEEPS,
    tol: float = SEARCH_TOL
) -> SearchResult:
    """Maximise score(t, sigma) by alternating bounded scalar searches in log space.

    Both endpoints of each coordinate are evaluated explicitly; the best point seen
    anywhere is returned. Collapsed bounds pin the coordinate.
    """
    seen: Dict[Tuple[float, Optional[float]], float] = {}

    def evaluate(t, sigma):
        key = (float(t), None if sigma is None else float(sigma))
        if key not in seen:
            try:
                value = float(score(*key))
            except HeatflowError as exc:
                logger.debug(f"search point t={key[0]:.4g} sigma={key[1]} failed: {exc}")
                value = -np.inf
            seen[key] = value if np.isfinite(value) else -np.inf
        return seen[key]

    def line_search(bounds, other, along_t):
        low, high = bounds
        point = (lambda u: (u, other)) if along_t else (lambda u: (other, u))
        evaluate(*point(low))
        evaluate(*point(high))
        if low == high:
            return low
        result = minimize_scalar(
            lambda log_u: -evaluate(*point(float(np.exp(log_u)))),
            bounds=(np.log(low), np.log(high)),
            method="bounded",
            options={"xatol": tol},
        )
        evaluate(*point(float(np.exp(result.x))))
        candidates = [(v, k) for k, v in seen.items() if (k[1] == other if along_t else k[0] == other)]
        best = max(candidates, key=lambda item: item[0])[1]
        return best[0] if along_t else best[1]

    t = float(np.sqrt(t_bounds[0] * t_bounds[1]))
    sigma = None if sigma_bounds is None else float(np.sqrt(sigma_bounds[0] * sigma_bounds[1]))
    for _ in range(max(1, sweeps)):
        t = line_search(t_bounds, sigma, along_t=True)
        if sigma_bounds is not None:
            sigma = line_search(sigma_bounds, t, along_t=False)

    # deterministic pick: highest value, then smaller t, then smaller sigma
    (t_best, sigma_best), value = min(
        seen.items(), key=lambda kv: (-kv[1], kv[0][0], kv[0][1] if kv[0][1] is not None else 0.0)
    )
    return SearchResult(t=t_best, sigma=sigma_best, loglik=value)


def optimize_t_sigma(
    k_factory: Callable[[float], np.ndarray],
    y: np.ndarray,
    t_bounds: Tuple[float, float],
    sigma_bounds: Optional[Tuple[float, float]] = None,
    sweeps: int = SEARCH_SWEEPS,
    tol: float = SEARCH_TOL
) -> SearchResult:
    """Empirical-Bayes search of (t, sigma) on the labeled block.

    With `sigma_bounds` the score is the Gaussian marginal likelihood; without it
    the labels are binary and the score is the Laplace evidence.
    """
    y = np.asarray(y, dtype=float)
    if min(t_bounds) <= 0 or (sigma_bounds is not None and min(sigma_bounds) <= 0):
        raise ValueError("search bounds must be positive")

    if sigma_bounds is not None:
        def score(t, sigma):
            return gaussian_marginal_loglik(k_factory(t), y, sigma)
    else:
        def score(t, _sigma):
            evidence, _ = laplace_evidence(add_jitter(k_factory(t), JITTER), y)
            return evidence

    result = coordinate_search(score, t_bounds, sigma_bounds, sweeps=sweeps, tol=tol)
    if not np.isfinite(result.loglik):
        raise FitError("no finite marginal likelihood inside the search bounds")
    return result


def _resolve_bounds(explicit, factors, scale: float) -> Tuple[float, float]:
    if explicit is not None:
        return tuple(float(b) for b in explicit)
    scale = scale if scale > 0 else 1.0
    return (float(factors[0] * scale), float(factors[1] * scale))


def _sigma_bounds(dataset: Dataset, config) -> Optional[Tuple[float, float]]:
    if dataset.task != "regression":
        return None
    spread = float(np.std(dataset.labels)) if dataset.m > 1 else 0.0
    return _resolve_bounds(config.sigma_bounds, config.sigma_bound_factors, spread)


def _score_metrics(dataset: Dataset, posterior: PosteriorSummary, test: range,
                   sigma: Optional[float]) -> Dict[str, Optional[float]]:
    metrics = {'error_rate': None, 'nll': None, 'rmse': None}
    if dataset.truth is None or len(test) == 0:
        return metrics
    truth = dataset.truth[test.start:test.stop]
    if dataset.task == "classification":
        metrics['error_rate'] = metric_error_rate(posterior.class_prob, truth)
        metrics['nll'] = metric_nll(posterior.class_prob, truth)
    else:
        metrics['rmse'] = metric_rmse(posterior.mean, truth)
        metrics['nll'] = metric_nll(posterior.mean, truth, variance=posterior.variance, sigma=sigma)
    return metrics


def _predict(dataset: Dataset, kernel: KernelSource, sigma: Optional[float], test: range) -> PosteriorSummary:
    return predict_posterior(kernel, dataset.labels, LikelihoodSpec.for_task(dataset.task, sigma), test)


def _pick(candidates: List[Dict[str, object]]) -> Dict[str, object]:
    """Best log-likelihood; ties go to the smaller epsilon, then the smaller t."""
    ok = [c for c in candidates if c['status'] == "ok"]
    if not ok:
        reasons = "; ".join(f"eps={c['epsilon']}: {c['error']}" for c in candidates)
        raise FitError(f"every candidate failed ({reasons})")
    return min(ok, key=lambda c: (-c['loglik'], c['epsilon'] or 0.0, c['t']))


def _search_spectra(
    dataset: Dataset,
    method: str,
    spectra: Callable[[Optional[float]], Tuple[LaplacianSpectrum, float]],
    grid,
    t_bounds: Tuple[float, float],
    sigma_bounds: Optional[Tuple[float, float]],
    timings: Dict[str, float]
) -> FitReport:
    """Shared loop over epsilon candidates for every heat-kernel method."""
    labeled = np.arange(dataset.m)
    candidates = []
    covariances = {}
    for eps in grid:
        record = {'epsilon': eps, 'status': "ok", 'error': None, 't': None, 'sigma': None, 'loglik': -np.inf}
        try:
            spectrum, divisor = spectra(eps)
            base = HeatKernelCovariance(spectrum, t=1.0, scale_divisor=divisor)
            with _timed(timings, "optimize"):
                found = optimize_t_sigma(
                    lambda t: base.with_t(t).block(labeled, labeled), dataset.labels, t_bounds, sigma_bounds
                )
            record.update(t=found.t, sigma=found.sigma, loglik=found.loglik)
            covariances[eps] = base.with_t(found.t)
        except (HeatflowError, LinAlgError, ArpackError) as exc:
            logger.warning(f"{method}: candidate eps={eps} failed: {exc}")
            record.update(status="failed", error=str(exc))
        candidates.append(record)

    best = _pick(candidates)
    cov = covariances[best['epsilon']]
    test = range(dataset.m, dataset.n)
    with _timed(timings, "predict"):
        posterior = _predict(dataset, cov, best['sigma'], test) if len(test) else PosteriorSummary(
            mean=np.zeros(0), variance=np.zeros(0), class_prob=None)
    report = FitReport(
        method=method,
        task=dataset.task,
        epsilon=best['epsilon'],
        t=best['t'],
        sigma=best['sigma'],
        loglik=best['loglik'],
        posterior=posterior,
        test_index=test,
        kernel=cov,
        timings=timings,
        candidates=candidates,
        truncated=cov.spectrum.truncated,
    )
    report.metrics = _score_metrics(dataset, posterior, test, best['sigma'])
    logger.info(
        f"{method}: eps={best['epsilon']}, t={best['t']:.4g}, loglik={best['loglik']:.4f}, "
        f"time={sum(timings.values()):.2f}s"
    )
    return report


def fit_flgp(dataset: Dataset, config: FLGPConfig, method: str = "flgp") -> FitReport:
    """Subsample, sparse kernel, transition pair, TSVD and heat-kernel GP on the cloud.

    Squared-exponential kernels repeat kernel, graph and TSVD per epsilon; LAE
    has no epsilon and runs them once.
    """
    cloud = dataset.cloud
    timings = {stage: 0.0 for stage in STAGES}
    with _timed(timings, "subsample"):
        induced = subsample(
            cloud, config.s, config.subsampling, config.seed,
            max_iter=config.kmeans_max_iter,
            batch=config.minibatch_size,
            iters=config.minibatch_iters,
        )
    r = min(config.r, induced.s)
    with _timed(timings, "kernel"):
        neighbors = landmark_neighbors(cloud, induced, r)

    if config.kernel == "se":
        grid = config.epsilon_grid or epsilon_grid(
            neighbors, config.epsilon_exponents, fallback=cloud.diameter() / induced.s or 1.0
        )
        grid = sorted(float(e) for e in grid)
    else:
        grid = [None]

    def spectra(eps):
        with _timed(timings, "kernel"):
            K = cross_kernel(cloud, induced, KernelConfig(kind=config.kernel, epsilon=eps, r=r), neighbors)
        with _timed(timings, "graph"):
            pair = row_normalize(cross_similarity(K, induced.counts))
        with _timed(timings, "tsvd"):
            spectrum = truncated_svd(pair, min(config.M, pair.s), seed=config.seed)
        return spectrum, (eps ** 2 if eps is not None else 1.0)

    t_bounds = _resolve_bounds(config.t_bounds, config.t_bound_factors, cloud.diameter() ** 2)
    return _search_spectra(dataset, method, spectra, grid, t_bounds, _sigma_bounds(dataset, config), timings)


def _grid_around(center: float, config: BaselineConfig) -> List[float]:
    if config.epsilon_grid:
        return sorted(float(e) for e in config.epsilon_grid)
    center = center if center > 0 else 1.0
    return [float(center * 2.0 ** k) for k in sorted(config.epsilon_exponents)]


def _neighbor_scale(points: np.ndarray, k: int = 3) -> float:
    """Median distance from a point to its k-th nearest other point."""
    k = min(k, points.shape[0] - 1)
    if k < 1:
        return 0.0
    _, sq = nearest_centers(points, points, k=k + 1)
    d = np.sqrt(sq[:, -1])
    return float(np.median(d[d > 0])) if np.any(d > 0) else 0.0


def fit_egp_baseline(dataset: Dataset, config: BaselineConfig) -> FitReport:
    """Squared-exponential GP on ambient coordinates; epsilon searched continuously in the t slot."""
    timings = {stage: 0.0 for stage in STAGES}
    labeled = np.arange(dataset.m)
    points = dataset.cloud.points
    with _timed(timings, "kernel"):
        distances = pdist(points[:dataset.m]) if dataset.m > 1 else np.zeros(0)
        positive = distances[distances > 0]
        center = float(np.median(positive)) if positive.size else dataset.cloud.diameter()
        grid = _grid_around(center, config)
    eps_bounds = (grid[0], grid[-1])

    with _timed(timings, "optimize"):
        found = optimize_t_sigma(
            lambda eps: EuclideanKernel(points, eps).block(labeled, labeled),
            dataset.labels, eps_bounds, _sigma_bounds(dataset, config),
        )
    kernel = EuclideanKernel(points, found.t)
    test = range(dataset.m, dataset.n)
    with _timed(timings, "predict"):
        posterior = _predict(dataset, kernel, found.sigma, test) if len(test) else PosteriorSummary(
            mean=np.zeros(0), variance=np.zeros(0), class_prob=None)
    report = FitReport(
        method="egp",
        task=dataset.task,
        epsilon=found.t,
        t=None,
        sigma=found.sigma,
        loglik=found.loglik,
        posterior=posterior,
        test_index=test,
        kernel=kernel,
        timings=timings,
        candidates=[{'epsilon': found.t, 'status': "ok", 'error': None, 't': None,
                     'sigma': found.sigma, 'loglik': found.loglik}],
    )
    report.metrics = _score_metrics(dataset, posterior, test, found.sigma)
    logger.info(f"egp: eps={found.t:.4g}, loglik={found.loglik:.4f}")
    return report


def fit_glgp_baseline(dataset: Dataset, config: BaselineConfig) -> FitReport:
    """One-step full-graph Laplacian GP; covariance n sum exp(-t lambda / eps^2) v v^T."""
    cloud = dataset.cloud
    timings = {stage: 0.0 for stage in STAGES}
    with _timed(timings, "kernel"):
        grid = _grid_around(_neighbor_scale(cloud.points), config)
    M = min(config.M, cloud.n)

    def spectra(eps):
        with _timed(timings, "graph"):
            ops = one_step_operators(cloud, eps, r_nn=config.r_nn)
        with _timed(timings, "tsvd"):
            spectrum = one_step_spectrum(ops, M)
        return spectrum, eps ** 2

    t_bounds = _resolve_bounds(config.t_bounds, config.t_bound_factors, cloud.diameter() ** 2)
    return _search_spectra(dataset, "glgp", spectra, grid, t_bounds, _sigma_bounds(dataset, config), timings)


def fit_nystrom_baseline(dataset: Dataset, config: BaselineConfig) -> FitReport:
    """GLGP on s uniformly sampled landmarks, eigenvectors extended to the cloud by Nystrom."""
    cloud = dataset.cloud
    timings = {stage: 0.0 for stage in STAGES}
    s = min(config.s, cloud.n)
    with _timed(timings, "subsample"):
        rng = np.random.default_rng(config.seed)
        landmark_index = np.sort(rng.choice(cloud.n, size=s, replace=False))
    with _timed(timings, "kernel"):
        grid = _grid_around(_neighbor_scale(cloud.points[landmark_index]), config)
    M = min(config.M, s)

    def spectra(eps):
        with _timed(timings, "tsvd"):
            spectrum = nystrom_spectrum(cloud, landmark_index, eps, M)
        return spectrum, eps ** 2

    t_bounds = _resolve_bounds(config.t_bounds, config.t_bound_factors, cloud.diameter() ** 2)
    return _search_spectra(dataset, "glgp-nystrom", spectra, grid, t_bounds, _sigma_bounds(dataset, config), timings)
