"""Exception hierarchy shared by every module.

The CLI maps :class:`ValidationError` to exit code 1 and
:class:`NumericalError` to exit code 2.
"""


class GapGraphError(Exception):
    """Base class for all package errors."""


class ValidationError(GapGraphError, ValueError):
    """Bad input: wrong shape, asymmetric matrix, malformed file, bad config."""


class NumericalError(GapGraphError, ArithmeticError):
    """A numerical routine failed (singular matrix, divergence, ...)."""


class ConvergenceError(NumericalError):
    """An iterative routine hit its iteration cap.

    ``residual`` holds the last measured residual (or step size) and
    ``iterations`` the number of iterations performed.
    """

    def __init__(self, message, residual=float("nan"), iterations=0, **diagnostics):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
        self.diagnostics = diagnostics
