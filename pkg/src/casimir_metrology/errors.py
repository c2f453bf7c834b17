"""Exception hierarchy shared by all modules."""


class CasimirError(Exception):
    """Base class for toolkit errors."""


class ValidationError(CasimirError, ValueError):
    """Input violates a documented invariant or precondition."""


class NumericalError(CasimirError, ArithmeticError):
    """A numerical procedure failed to converge or produced non-finite values."""


class SeriesError(NumericalError):
    pass


class QuadratureError(NumericalError):
    """Adaptive quadrature exhausted its budget.

    Attributes
    ----------
    estimate : float or ndarray
        Best integral estimate reached.
    error_bound : float or ndarray
        Accumulated error estimate at that point.
    """

    def __init__(self, message, estimate=None, error_bound=None):
        super().__init__(message)
        self.estimate = estimate
        self.error_bound = error_bound


class FitError(NumericalError):
    """Least-squares fit diverged or hit its iteration cap."""

    def __init__(self, message, params=None, chi2_trace=None):
        super().__init__(message)
        self.params = params
        self.chi2_trace = list(chi2_trace) if chi2_trace is not None else []
