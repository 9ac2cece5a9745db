"""GP inference over any kernel source: Gaussian regression and Laplace classification."""
from dataclasses import dataclass
from typing import Optional, Protocol, Tuple
import numpy as np
from scipy.integrate import quad_vec
from scipy.linalg import LinAlgError, cho_factor, cho_solve, solve_triangular
from scipy.spatial.distance import cdist
from scipy.special import expit
from scipy.stats import norm
from src.config import GH_MAX_NODES, GH_NODES, JITTER, JITTER_DECADES, LAPLACE_MAX_ITER, LAPLACE_TOL
from src.exceptions import ConditioningError, FitError
from src.heatkernel import add_jitter
from src.logging_config import logger

LOG_2PI = np.log(2.0 * np.pi)


class KernelSource(Protocol):
    """Anything that serves covariance blocks over cloud indices."""
    n: int

    def block(self, rows, cols) -> np.ndarray: ...

    def diagonal(self, idx) -> np.ndarray: ...


@dataclass(frozen=True)
class DenseKernel:
    """Explicit n x n covariance matrix."""
    matrix: np.ndarray

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def block(self, rows, cols) -> np.ndarray:
        return self.matrix[np.ix_(np.asarray(rows), np.asarray(cols))]

    def diagonal(self, idx) -> np.ndarray:
        idx = np.asarray(idx)
        return self.matrix[idx, idx]


@dataclass(frozen=True)
class EuclideanKernel:
    """Squared-exponential kernel exp(-|x - x'|^2 / (4 eps^2)) on ambient coordinates."""
    points: np.ndarray
    epsilon: float

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def block(self, rows, cols) -> np.ndarray:
        rows, cols = np.asarray(rows), np.asarray(cols)
        sq = cdist(self.points[rows], self.points[cols], "sqeuclidean")
        return np.exp(-sq / (4.0 * self.epsilon ** 2))

    def diagonal(self, idx) -> np.ndarray:
        return np.ones(np.asarray(idx).size)


@dataclass(frozen=True)
class LikelihoodSpec:
    """Gaussian (identity link, noise sd sigma) or Bernoulli with logistic link."""
    kind: str
    sigma: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("gaussian", "bernoulli"):
            raise ValueError(f"likelihood kind must be 'gaussian' or 'bernoulli', got {self.kind!r}")
        if self.kind == "gaussian" and (self.sigma is None or self.sigma <= 0):
            raise ValueError(f"gaussian likelihood needs sigma > 0, got {self.sigma}")

    @classmethod
    def gaussian(cls, sigma: float) -> "LikelihoodSpec":
        return cls("gaussian", sigma)

    @classmethod
    def bernoulli(cls) -> "LikelihoodSpec":
        return cls("bernoulli")

    @classmethod
    def for_task(cls, task: str, sigma: Optional[float] = None) -> "LikelihoodSpec":
        return cls.gaussian(sigma) if task == "regression" else cls.bernoulli()

    def link(self, u):
        return np.asarray(u, dtype=float) if self.kind == "gaussian" else expit(u)


@dataclass(frozen=True)
class PosteriorSummary:
    """Predictive mean of the response, latent variance and (classification) class probability."""
    mean: np.ndarray
    variance: np.ndarray
    class_prob: Optional[np.ndarray] = None


def stable_cholesky(A: np.ndarray, jitter: float = JITTER, decades: int = JITTER_DECADES):
    """Lower Cholesky factor of A + jitter*(trace/m)*I, escalating the jitter by decades."""
    last_error = None
    for k in range(decades + 1):
        level = jitter * 10.0 ** k
        try:
            factor = cho_factor(add_jitter(A, level), lower=True, check_finite=True)
            if k:
                logger.warning(f"Cholesky succeeded after jitter escalation to {level:.1e}")
            return factor
        except (LinAlgError, ValueError) as exc:
            last_error = exc
    raise ConditioningError(f"factorization failed with jitter up to {jitter * 10.0 ** decades:.1e}: {last_error}")


def _log_det(factor) -> float:
    return 2.0 * float(np.sum(np.log(np.diag(factor[0]))))


def gaussian_marginal_loglik(Kmm: np.ndarray, y: np.ndarray, sigma: float) -> float:
    """log N(y | 0, Kmm + sigma^2 I)."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    y = np.asarray(y, dtype=float)
    m = y.size
    factor = stable_cholesky(np.asarray(Kmm, dtype=float) + sigma ** 2 * np.eye(m))
    alpha = cho_solve(factor, y)
    return float(-0.5 * y @ alpha - 0.5 * _log_det(factor) - 0.5 * m * LOG_2PI)


def _check_test(test, m: int) -> np.ndarray:
    test = np.atleast_1d(np.asarray(test, dtype=np.int64))
    if test.size and test.min() < m:
        raise ValueError(f"test indices must lie outside the labeled prefix [0, {m})")
    return test


def gp_regression_predict(
    kernel: KernelSource,
    y: np.ndarray,
    sigma: float,
    test
) -> PosteriorSummary:
    """Conditional Gaussian on the labeled prefix 0..m-1.

    mean = K_tm (K_mm + sigma^2 I)^-1 y, var = K_tt - K_tm (K_mm + sigma^2 I)^-1 K_mt.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    y = np.asarray(y, dtype=float)
    labeled = np.arange(y.size)
    test = _check_test(test, y.size)
    factor = stable_cholesky(kernel.block(labeled, labeled) + sigma ** 2 * np.eye(y.size))
    alpha = cho_solve(factor, y)
    cross = kernel.block(test, labeled)
    mean = cross @ alpha
    v = solve_triangular(factor[0], cross.T, lower=True)
    variance = np.maximum(kernel.diagonal(test) - np.sum(v * v, axis=0), 0.0)
    return PosteriorSummary(mean=mean, variance=variance)


@dataclass(frozen=True)
class LaplaceFit:
    """Posterior mode of the latent f on the labeled block and the quantities prediction reuses."""
    mode: np.ndarray
    W: np.ndarray
    pi: np.ndarray
    a: np.ndarray
    y: np.ndarray
    evidence: float
    gradient_norm: float
    iterations: int
    chol_B: np.ndarray


def _bernoulli_loglik(y: np.ndarray, f: np.ndarray) -> float:
    signs = 2.0 * y - 1.0
    return float(-np.sum(np.logaddexp(0.0, -signs * f)))


def laplace_fit(
    Kmm: np.ndarray,
    y: np.ndarray,
    tol: float = LAPLACE_TOL,
    max_iter: int = LAPLACE_MAX_ITER
) -> LaplaceFit:
    """Newton iterations for the mode of log p(y|f) - f^T K^-1 f / 2.

    Works in the a = K^-1 f parameterisation with B = I + W^1/2 K W^1/2, halving
    the step whenever the objective would decrease. The gradient at f = K a is
    (y - pi) - a.
    """
    K = np.asarray(Kmm, dtype=float)
    y = np.asarray(y, dtype=float)
    m = y.size
    if not np.all(np.isin(y, (0.0, 1.0))):
        raise ValueError("laplace_fit needs labels in {0, 1}")

    def objective(a, f):
        return -0.5 * float(a @ f) + _bernoulli_loglik(y, f)

    a = np.zeros(m)
    f = np.zeros(m)
    psi = objective(a, f)
    gradient_norm = np.inf
    iterations = 0
    for iterations in range(max_iter + 1):
        pi = expit(f)
        gradient_norm = float(np.max(np.abs((y - pi) - a)))
        if gradient_norm < tol or iterations == max_iter:
            break
        W = pi * (1.0 - pi)
        sW = np.sqrt(W)
        factor = stable_cholesky(np.eye(m) + sW[:, None] * K * sW[None, :])
        b = W * f + (y - pi)
        a_new = b - sW * cho_solve(factor, sW * (K @ b))
        f_new = K @ a_new
        psi_new = objective(a_new, f_new)
        # steps within round-off of the current objective are accepted
        slack = 1e-12 * max(1.0, abs(psi))
        for _ in range(30):
            if psi_new >= psi - slack:
                break
            a_new = 0.5 * (a + a_new)
            f_new = K @ a_new
            psi_new = objective(a_new, f_new)
        a, f, psi = a_new, f_new, psi_new

    if gradient_norm >= tol:
        raise FitError(
            f"Laplace iterations did not converge in {max_iter} steps (gradient {gradient_norm:.3e})",
            gradient_norm=gradient_norm,
        )

    pi = expit(f)
    W = pi * (1.0 - pi)
    sW = np.sqrt(W)
    factor = stable_cholesky(np.eye(m) + sW[:, None] * K * sW[None, :])
    evidence = psi - 0.5 * _log_det(factor)
    return LaplaceFit(
        mode=f,
        W=W,
        pi=pi,
        a=a,
        y=y,
        evidence=float(evidence),
        gradient_norm=gradient_norm,
        iterations=iterations,
        chol_B=factor[0],
    )


def laplace_gradient(Kmm: np.ndarray, y: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Gradient (y - pi(f)) - K^-1 f of the Laplace objective, by direct solve."""
    return (np.asarray(y, dtype=float) - expit(f)) - np.linalg.solve(Kmm, f)


def _node_count(variance: float, base: int) -> int:
    return base * max(1, int(np.ceil(np.sqrt(max(variance, 0.0)))))


def _wide_class_probability(mean: np.ndarray, sd: np.ndarray) -> np.ndarray:
    """E[logistic(f)] as P(f > 0) plus the logistic correction on each side of 0.

    The correction integrand sigmoid(-x) (p(-x) - p(x)) decays like exp(-x), so
    the adaptive rule runs on [0, 40].
    """
    def correction(x):
        return expit(-x) * (norm.pdf(-x, loc=mean, scale=sd) - norm.pdf(x, loc=mean, scale=sd))

    tail, _ = quad_vec(correction, 0.0, 40.0, epsabs=1e-10, epsrel=1e-10)
    return norm.cdf(mean / sd) + tail


def class_probability(
    mean,
    variance,
    nodes: int = GH_NODES,
    max_nodes: int = GH_MAX_NODES
) -> np.ndarray:
    """E[logistic(f)] for f ~ N(mean, variance).

    Gauss-Hermite quadrature with a node count that grows with the latent
    standard deviation above 1; past `max_nodes` the integral is split at 0
    and the remainder integrated adaptively.
    """
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    variance = np.maximum(np.atleast_1d(np.asarray(variance, dtype=float)), 0.0)
    counts = np.array([_node_count(v, nodes) for v in variance], dtype=np.int64)
    wide = counts > max_nodes
    prob = np.empty_like(mean)
    for count in np.unique(counts[~wide]):
        sel = (counts == count) & ~wide
        x, w = np.polynomial.hermite.hermgauss(int(count))
        f = mean[sel, None] + np.sqrt(2.0 * variance[sel, None]) * x[None, :]
        prob[sel] = expit(f) @ w / np.sqrt(np.pi)
    if np.any(wide):
        prob[wide] = _wide_class_probability(mean[wide], np.sqrt(variance[wide]))
    return np.clip(prob, 0.0, 1.0)


def laplace_predict_prob(fit: LaplaceFit, cross: np.ndarray, test_diag: np.ndarray) -> PosteriorSummary:
    """Latent predictive moments from the Laplace fit, then class probabilities.

    `cross` is the |test| x m cross-covariance block and `test_diag` the prior
    variances of the test points.
    """
    cross = np.asarray(cross, dtype=float)
    latent_mean = cross @ (fit.y - fit.pi)
    sW = np.sqrt(fit.W)
    v = solve_triangular(fit.chol_B, sW[:, None] * cross.T, lower=True)
    variance = np.maximum(np.asarray(test_diag, dtype=float) - np.sum(v * v, axis=0), 0.0)
    prob = class_probability(latent_mean, variance)
    return PosteriorSummary(mean=prob, variance=variance, class_prob=prob)


def predict_classification(kernel: KernelSource, fit: LaplaceFit, test) -> PosteriorSummary:
    """Laplace prediction on test indices of a kernel source."""
    test = _check_test(test, fit.y.size)
    labeled = np.arange(fit.y.size)
    return laplace_predict_prob(fit, kernel.block(test, labeled), kernel.diagonal(test))


def laplace_evidence(Kmm: np.ndarray, y: np.ndarray) -> Tuple[float, LaplaceFit]:
    """Approximate log marginal likelihood used for classification model selection."""
    fit = laplace_fit(Kmm, y)
    return fit.evidence, fit


def predict_posterior(kernel: KernelSource, y: np.ndarray, likelihood: LikelihoodSpec, test) -> PosteriorSummary:
    """Posterior on test indices under the given likelihood, conditioning on the labeled prefix."""
    if likelihood.kind == "gaussian":
        return gp_regression_predict(kernel, y, likelihood.sigma, test)
    labeled = np.arange(np.asarray(y).size)
    _, fit = laplace_evidence(add_jitter(kernel.block(labeled, labeled), JITTER), y)
    return predict_classification(kernel, fit, test)
