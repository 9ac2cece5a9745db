from pydantic import BaseModel, Field, field_validator, model_validator
from typing import List, Optional, Dict, Any, Literal, Tuple
from src.config import OUTPUT_DIR

MethodName = Literal["egp", "glgp", "glgp-nystrom", "srflgp", "skflgp", "lrflgp", "lkflgp"]

# (base kernel, subsampling) behind each FLGP method name
FLGP_METHODS = {
    "srflgp": ("se", "random"),
    "skflgp": ("se", "kmeans"),
    "lrflgp": ("lae", "random"),
    "lkflgp": ("lae", "kmeans"),
}


def _ordered_positive(bounds: Tuple[float, float], name: str) -> Tuple[float, float]:
    low, high = bounds
    if low <= 0 or high <= 0:
        raise ValueError(f"{name} must be positive, got {bounds}")
    if low > high:
        raise ValueError(f"{name} must be ordered (low <= high), got {bounds}")
    return bounds


class KernelConfig(BaseModel):
    """Base kernel selection for the cross kernel matrix."""
    kind: Literal["se", "lae"] = "se"
    epsilon: Optional[float] = Field(default=None, gt=0)
    r: int = Field(default=3, ge=1)

    @model_validator(mode="after")
    def _epsilon_for_se(self):
        if self.kind == "se" and self.epsilon is None:
            raise ValueError("squared-exponential kernel requires epsilon > 0")
        return self


class FLGPConfig(BaseModel):
    """Inputs of the FLGP fit: rank budget, kernel choice and search ranges."""
    s: int = Field(default=600, ge=1)
    r: int = Field(default=3, ge=1)
    M: int = Field(default=100, ge=1)
    subsampling: Literal["random", "kmeans", "minibatch"] = "kmeans"
    kernel: Literal["se", "lae"] = "se"
    # explicit grid wins over the exponent rule {2^k * eps0}
    epsilon_grid: Optional[List[float]] = None
    epsilon_exponents: List[int] = Field(default_factory=lambda: [-2, -1, 0, 1, 2])
    # t bounds are either absolute or factors of the squared cloud diameter
    t_bounds: Optional[Tuple[float, float]] = None
    t_bound_factors: Tuple[float, float] = (1e-3, 10.0)
    sigma_bounds: Optional[Tuple[float, float]] = None
    sigma_bound_factors: Tuple[float, float] = (1e-3, 1.0)
    kmeans_max_iter: Optional[int] = Field(default=None, ge=1)
    minibatch_size: Optional[int] = Field(default=None, ge=1)
    minibatch_iters: Optional[int] = Field(default=None, ge=1)
    seed: int = 0

    @field_validator("epsilon_grid")
    @classmethod
    def _grid_positive(cls, grid):
        if grid is not None:
            if not grid:
                raise ValueError("epsilon_grid must be non-empty")
            if any(e <= 0 for e in grid):
                raise ValueError("epsilon_grid values must be positive")
        return grid

    @field_validator("epsilon_exponents")
    @classmethod
    def _exponents_nonempty(cls, exponents):
        if not exponents:
            raise ValueError("epsilon_exponents must be non-empty")
        return exponents

    @model_validator(mode="after")
    def _check_ranks(self):
        if self.r > self.s:
            raise ValueError(f"r ({self.r}) must not exceed s ({self.s})")
        if self.M > self.s:
            raise ValueError(f"M ({self.M}) must not exceed s ({self.s})")
        for name in ("t_bounds", "t_bound_factors", "sigma_bounds", "sigma_bound_factors"):
            value = getattr(self, name)
            if value is not None:
                _ordered_positive(value, name)
        return self


class BaselineConfig(BaseModel):
    """Settings shared by the EGP, GLGP and Nystrom baselines."""
    M: int = Field(default=100, ge=1)
    s: int = Field(default=600, ge=1)
    r_nn: Optional[int] = Field(default=None, ge=1)
    epsilon_grid: Optional[List[float]] = None
    epsilon_exponents: List[int] = Field(default_factory=lambda: [-2, -1, 0, 1, 2])
    t_bounds: Optional[Tuple[float, float]] = None
    t_bound_factors: Tuple[float, float] = (1e-3, 10.0)
    sigma_bounds: Optional[Tuple[float, float]] = None
    sigma_bound_factors: Tuple[float, float] = (1e-3, 1.0)
    seed: int = 0

    @model_validator(mode="after")
    def _check_bounds(self):
        for name in ("t_bounds", "t_bound_factors", "sigma_bounds", "sigma_bound_factors"):
            value = getattr(self, name)
            if value is not None:
                _ordered_positive(value, name)
        if self.epsilon_grid is not None and (not self.epsilon_grid or min(self.epsilon_grid) <= 0):
            raise ValueError("epsilon_grid must be non-empty and positive")
        return self


class ExperimentConfig(BaseModel):
    """JSON experiment description consumed by `heatflow run`."""
    experiment: Literal["circles", "spiral", "csv"] = "circles"
    methods: List[MethodName] = Field(default_factory=lambda: ["skflgp"])
    n: int = Field(default=3000, ge=2)
    m: int = Field(default=50, ge=1)
    repetitions: int = Field(default=1, ge=1)
    seed: int = 0
    noise_sd: float = Field(default=0.1, ge=0)
    dataset_path: Optional[str] = None
    task: Literal["regression", "classification"] = "classification"
    flgp: Dict[str, Any] = Field(default_factory=dict)
    baseline: Dict[str, Any] = Field(default_factory=dict)
    overrides: Dict[str, Dict[str, Any]] = Field(default_factory=dict)
    output_dir: str = OUTPUT_DIR
    threads: Optional[int] = Field(default=None, ge=1)

    @model_validator(mode="after")
    def _check_consistency(self):
        if not self.methods:
            raise ValueError("methods must be non-empty")
        if self.m > self.n:
            raise ValueError(f"m ({self.m}) must not exceed n ({self.n})")
        if self.experiment == "circles" and self.n % 6 != 0:
            raise ValueError(f"circles experiment needs n divisible by 6, got {self.n}")
        if self.experiment == "csv" and not self.dataset_path:
            raise ValueError("csv experiment requires dataset_path")
        unknown = set(self.overrides) - set(self.methods)
        if unknown:
            raise ValueError(f"overrides for methods not in the method list: {sorted(unknown)}")
        return self

    @property
    def resolved_task(self) -> str:
        if self.experiment == "circles":
            return "classification"
        if self.experiment == "spiral":
            return "regression"
        return self.task


# Fixed, documented column order of runs.csv
RUN_COLUMNS = [
    "method", "repetition", "seed", "status", "n", "m",
    "error_rate", "nll", "rmse", "loglik", "epsilon", "t", "sigma", "error",
]

STAGES = ["subsample", "kernel", "graph", "tsvd", "optimize", "predict"]

TIMING_COLUMNS = ["method", "repetition", "seed"] + [f"time_{s}" for s in STAGES] + ["time_total"]

SUMMARY_COLUMNS = ["method", "metric", "mean", "sd", "n_runs"]

METRICS = ["error_rate", "nll", "rmse"]


class RunRecord(BaseModel):
    """One method x repetition outcome."""
    method: str
    repetition: int
    seed: int
    status: Literal["ok", "failed"] = "ok"
    n: int = 0
    m: int = 0
    error_rate: Optional[float] = None
    nll: Optional[float] = None
    rmse: Optional[float] = None
    loglik: Optional[float] = None
    epsilon: Optional[float] = None
    t: Optional[float] = None
    sigma: Optional[float] = None
    error: Optional[str] = None
    timings: Dict[str, float] = Field(default_factory=dict)


def load_experiment_config(data: Dict[str, Any]) -> ExperimentConfig:
    """Validate a parsed JSON document into an ExperimentConfig."""
    return ExperimentConfig(**data)
