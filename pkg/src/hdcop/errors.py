"""Semantic exception hierarchy shared across the package."""


class HdcopError(Exception):
    """Base class for all package errors."""


class TiesDetected(HdcopError):
    """A data column contains tied values; ranks are not well defined.

    Continuous-margin methods require tie-free columns.  Callers may jitter
    (see :func:`hdcop.ranks.jitter_ties`) or abort.
    """

    def __init__(self, column: int, message: str | None = None):
        self.column = column
        super().__init__(message or f"ties detected in column {column}")


class DegenerateColumn(HdcopError):
    """A data column is constant (zero range); jittering is impossible."""

    def __init__(self, column: int):
        self.column = column
        super().__init__(f"column {column} is constant (zero range)")


class DimensionMismatch(HdcopError):
    """Evaluation point dimension does not match the model dimension."""


class BoundaryPoint(HdcopError):
    """A partial derivative was requested at a coordinate in {0, 1}."""


class ToleranceNotMet(HdcopError):
    """A numerical integration error estimate exceeds the requested tolerance."""

    def __init__(self, estimate: float, tolerance: float):
        self.estimate = estimate
        self.tolerance = tolerance
        super().__init__(f"integration error estimate {estimate:.3e} exceeds tolerance {tolerance:.3e}")


class UnsupportedSampler(HdcopError):
    """The copula family does not provide a sampler."""


class QuadratureFailure(HdcopError):
    """An adaptive quadrature failed to reach the required absolute tolerance."""


class DegenerateDimension(HdcopError):
    """Gumbel calibration needs more than one pair (d >= 3)."""


class DimensionTooSmall(HdcopError):
    """The operation requires a larger dimension (e.g. d >= 3 for log log d)."""


class ConfigInvalid(HdcopError):
    """An experiment configuration failed validation."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("invalid configuration: " + "; ".join(self.problems))


class InsufficientReplicates(UserWarning):
    """Warning: B * alpha < 5, the bootstrap quantile is very coarse."""
