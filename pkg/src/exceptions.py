from typing import Optional, Sequence


class HeatflowError(Exception):
    """Base class for library errors."""


class DatasetParseError(HeatflowError, ValueError):
    """Malformed dataset row."""

    def __init__(self, row: int, message: str):
        self.row = row
        super().__init__(f"row {row}: {message}")


class EmptyLabelsError(HeatflowError, ValueError):
    """Dataset without a single labeled row."""


class ConditioningError(HeatflowError):
    """Symmetric factorization failed even after jitter escalation."""


class SpectralSolverError(HeatflowError):
    """Iterative singular value solver did not converge."""

    def __init__(self, message: str, residuals: Optional[Sequence[float]] = None):
        self.residuals = list(residuals) if residuals is not None else []
        super().__init__(message)


class FitError(HeatflowError):
    """Model fitting failed."""

    def __init__(self, message: str, gradient_norm: Optional[float] = None):
        self.gradient_norm = gradient_norm
        super().__init__(message)


class SizeGuardError(HeatflowError, ValueError):
    """Requested dense computation exceeds the configured size guard."""


class ReportError(HeatflowError):
    """Experiment report could not be produced."""
