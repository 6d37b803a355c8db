"""Exception hierarchy shared by all fiberpinn modules."""


class FiberPinnError(Exception):
    """Base class for every error raised by this package."""


class InvalidParameterError(FiberPinnError, ValueError):
    pass


class DegenerateDispersionError(InvalidParameterError):
    """beta2 == 0 leaves the dispersion length undefined."""


class InvalidGridError(FiberPinnError, ValueError):
    pass


class InvalidConfigError(FiberPinnError, ValueError):
    pass


class InvalidArchitectureError(FiberPinnError, ValueError):
    pass


class InvalidGradientError(FiberPinnError, ValueError):
    pass


class InvalidCoefficientsError(FiberPinnError, ValueError):
    pass


class CoverageError(FiberPinnError, ValueError):
    """A requested grid node is not covered by the available samples."""


class OutOfRangeError(FiberPinnError, ValueError):
    pass


class DivergenceError(FiberPinnError, ArithmeticError):
    """A numerical iteration produced NaN or Inf.

    ``last_finite`` carries whatever state was last known to be finite
    (a field, a parameter set, a coefficient vector), or None.
    """

    def __init__(self, message, last_finite=None, step=None):
        super().__init__(message)
        self.last_finite = last_finite
        self.step = step
