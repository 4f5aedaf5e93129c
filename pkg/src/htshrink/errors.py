"""Exception types shared across the package."""


class HTShrinkError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(HTShrinkError, ValueError):
    pass


class DomainError(HTShrinkError, ValueError):
    """An argument lies outside the mathematical domain of a function."""


class SingularityError(HTShrinkError, ValueError):
    """A design matrix is rank deficient."""


class UnsupportedOperationError(HTShrinkError, NotImplementedError):
    pass


class NumericalFailure(HTShrinkError, RuntimeError):
    """A numerical routine did not converge.

    ``best_estimate`` carries whatever the routine had computed when it gave
    up (may be ``None``).
    """

    def __init__(self, message, best_estimate=None):
        super().__init__(message)
        self.best_estimate = best_estimate
