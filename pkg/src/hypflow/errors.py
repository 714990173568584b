"""Exception hierarchy shared by all hypflow modules."""

from __future__ import annotations


class HypflowError(Exception):
    """Base class for every error raised by this package."""


class ContractViolation(HypflowError, ValueError):
    """An argument broke a documented precondition."""


class DomainError(HypflowError, ValueError):
    """A point or parameter lies outside the admissible region."""


class SingularCurvatureError(HypflowError, ArithmeticError):
    """Hyperbolic curvature vanished where its reciprocal is needed."""


class ThresholdSearchError(HypflowError, RuntimeError):
    """The bracket for the Type I/II threshold does not straddle a switch."""

    def __init__(self, message: str, labels: tuple[str, str]):
        super().__init__(message)
        self.labels = labels


class FlowTerminated(HypflowError, RuntimeError):
    """A flow run stopped before the requested time."""

    def __init__(self, message: str, cause: str, t: float):
        super().__init__(message)
        self.cause = cause
        self.t = t
