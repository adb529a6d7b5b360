"""
Error types raised by the incidental regression package.
"""

from typing import Optional


class IncidentalRegressionError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(IncidentalRegressionError, ValueError):
    """Array shapes disagree (e.g. len(Y) != rows of X)."""


class SingularDesign(IncidentalRegressionError):
    """Design matrix is rank-deficient within the configured tolerance."""


class EmptySubset(IncidentalRegressionError):
    """An index subset has too few rows (|S| <= d) for a least-squares refit."""


class WrongPenaltyKind(IncidentalRegressionError, ValueError):
    """Operation is only defined for one penalty kind."""


class SingularGram(IncidentalRegressionError):
    """Sample Gram matrix cannot be inverted."""


class RankDeficientMap(IncidentalRegressionError, ValueError):
    """Linear map does not have full row rank."""


class DegenerateInterval(IncidentalRegressionError):
    """Lambda search interval is empty (lambda_L >= lambda_U)."""

    def __init__(self, message: str, lambda_low: float, lambda_high: float):
        super().__init__(message)
        self.lambda_low = lambda_low
        self.lambda_high = lambda_high


class ConfigError(IncidentalRegressionError, ValueError):
    """Experiment configuration failed validation."""


class ParseError(IncidentalRegressionError, ValueError):
    """Input data file could not be parsed."""

    def __init__(self, message: str, line: Optional[int] = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
