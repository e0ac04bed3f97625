"""Error types raised by the numerical routines."""


class QuadratureError(RuntimeError):
    """A quadrature did not reach its accuracy target.

    ``value`` holds the best available estimate, ``residual`` the error
    estimate that failed the check.
    """

    def __init__(self, message, value=None, residual=None):
        super().__init__(message)
        self.value = value
        self.residual = residual


class CostBudgetExceeded(RuntimeError):
    """The evaluation budget ran out before the requested quantity was done.

    ``partial`` is the value built from the work completed and ``residual``
    bounds the missing contribution.
    """

    def __init__(self, message, partial=None, residual=None):
        super().__init__(message)
        self.partial = partial
        self.residual = residual


class BoundViolation(AssertionError):
    """An inequality that should hold came out violated beyond tolerance."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class FitError(ValueError):
    """A curve fit could not be carried out on the supplied data."""


class ConfigError(ValueError):
    """An experiment configuration is malformed or inconsistent."""
