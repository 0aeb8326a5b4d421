"""Exception types shared across phaselab."""


class PhaselabError(Exception):
    """Base class for all library errors."""


class DomainError(PhaselabError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class RangeError(PhaselabError, ValueError):
    """A value lies outside the range of an inverse function (e.g. ``kappa >= kappa_max``)."""

    def __init__(self, message, limit=None):
        super().__init__(message)
        self.limit = limit


class QuadratureError(PhaselabError, RuntimeError):
    """Adaptive quadrature failed to reach its tolerance."""

    def __init__(self, message, error_estimate):
        super().__init__(f"{message} (achieved error estimate {error_estimate:.3e})")
        self.error_estimate = error_estimate


class ConsistencyError(PhaselabError, ValueError):
    """Inputs violate a required relation, e.g. the compatibility equation."""


class ConvergenceError(PhaselabError, RuntimeError):
    """An iterative solver, eigensolver or fit did not converge or detect its regime."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
