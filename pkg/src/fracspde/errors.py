"""Exception hierarchy shared by every module."""


class ValidationError(ValueError):
    """A configuration or argument violates a documented constraint."""


class NumericalError(ArithmeticError):
    """A computation failed to converge or produced non-finite values."""

    def __init__(self, message, *, step=None, residual=None):
        super().__init__(message)
        self.step = step
        self.residual = residual


class OptimizationError(NumericalError):
    """The penalized rate-function minimizer stalled or its gradient is wrong."""

    def __init__(self, message, *, trace=None, **kwargs):
        super().__init__(message, **kwargs)
        self.trace = trace
