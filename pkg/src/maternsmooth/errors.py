"""Exception types shared across the package."""


class MaternSmoothError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(MaternSmoothError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class AccuracyError(MaternSmoothError, ArithmeticError):
    """A numerical routine could not reach its accuracy target.

    The ``achieved`` attribute carries an estimate of the relative error
    that was actually reached, when one is available.
    """

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class DegenerateDesignError(MaternSmoothError, ValueError):
    """A point set contains duplicates or is otherwise unusable."""


class ConditioningError(MaternSmoothError, ArithmeticError):
    """Cholesky factorization of a kernel matrix failed.

    Signals a numerically singular kernel matrix, typically caused by
    near-duplicate points or an extreme smoothness/length-scale choice.
    No jitter is ever added silently; callers decide how to react.

    Attributes
    ----------
    pivot_index : int
        Zero-based index of the first offending pivot.
    pivot_value : float
        Value of that pivot (non-positive or below the relative threshold).
    """

    def __init__(self, message, pivot_index=-1, pivot_value=float("nan")):
        super().__init__(message)
        self.pivot_index = pivot_index
        self.pivot_value = pivot_value


class EstimationError(MaternSmoothError, RuntimeError):
    """No parameter value in the search bracket could be evaluated."""
