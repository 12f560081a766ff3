"""Exception hierarchy shared by every module."""


class BridgeError(Exception):
    """Base class for all errors raised by alphabridge."""


class DomainError(BridgeError, ValueError):
    """An argument lies outside the domain where a quantity is defined."""


class DegenerateEstimateError(DomainError):
    """An estimator was asked for a value on a degenerate path (e.g. zero energy)."""


class DegeneratePathError(DomainError):
    """A path has too few points for the requested statistic."""


class StepSizeError(DomainError):
    """Euler-Maruyama stability guard violated.

    Attributes
    ----------
    index : int
        Index of the offending step in the grid.
    """

    def __init__(self, message, index):
        super().__init__(message)
        self.index = index


class NumericalError(BridgeError, ArithmeticError):
    """A numerical procedure (e.g. Cholesky factorization) failed."""


class SpecError(BridgeError, ValueError):
    """Invalid experiment specification; message starts with the field path."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
