from typing import Dict, List, Optional
import numpy as np
from scipy.stats import norm
from sklearn.metrics import log_loss, mean_squared_error, zero_one_loss
from src.schemas import METRICS, RunRecord


def _check_lengths(predictions, truth):
    predictions = np.asarray(predictions, dtype=float).ravel()
    truth = np.asarray(truth, dtype=float).ravel()
    if predictions.size == 0:
        raise ValueError("metrics need at least one prediction")
    if predictions.size != truth.size:
        raise ValueError(f"predictions ({predictions.size}) and truth ({truth.size}) differ in length")
    return predictions, truth


def metric_error_rate(class_prob, truth) -> float:
    """Mean 0-1 loss with threshold 1/2; ties go to class 1."""
    class_prob, truth = _check_lengths(class_prob, truth)
    predicted = (class_prob >= 0.5).astype(int)
    return float(zero_one_loss(truth.astype(int), predicted))


def metric_rmse(predictions, truth) -> float:
    """Root mean squared error."""
    predictions, truth = _check_lengths(predictions, truth)
    return float(np.sqrt(mean_squared_error(truth, predictions)))


def metric_nll(predictions, truth, variance=None, sigma: Optional[float] = None) -> float:
    """Mean negative predictive log-likelihood.

    Without `variance` the predictions are Bernoulli probabilities of class 1;
    with it they are Gaussian means whose predictive variance is variance + sigma^2.
    """
    predictions, truth = _check_lengths(predictions, truth)
    if variance is None:
        # sklearn clips probabilities away from 0 and 1 internally
        return float(log_loss(truth.astype(int), predictions, labels=[0, 1]))
    scale = np.sqrt(np.asarray(variance, dtype=float).ravel() + (sigma or 0.0) ** 2)
    return float(-np.mean(norm.logpdf(truth, loc=predictions, scale=scale)))


def summary_statistics(values: List[float]) -> Dict[str, float]:
    """Mean and sample standard deviation (0.0 for a single value)."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("summary needs at least one value")
    sd = float(np.std(values, ddof=1)) if values.size > 1 else 0.0
    return {'mean': float(np.mean(values)), 'sd': sd, 'n_runs': int(values.size)}


def summarize_runs(runs: List[RunRecord]) -> List[Dict[str, object]]:
    """One row per (method, metric) over successful runs, in first-seen method order."""
    methods = list(dict.fromkeys(r.method for r in runs))
    rows = []
    for method in methods:
        ok = [r for r in runs if r.method == method and r.status == "ok"]
        for metric in METRICS:
            values = [getattr(r, metric) for r in ok if getattr(r, metric) is not None]
            if not values:
                continue
            rows.append({'method': method, 'metric': metric, **summary_statistics(values)})
    return rows


def failure_counts(runs: List[RunRecord]) -> Dict[str, int]:
    """Failed runs per method."""
    counts = {}
    for r in runs:
        counts.setdefault(r.method, 0)
        if r.status != "ok":
            counts[r.method] += 1
    return counts
