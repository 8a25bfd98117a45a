"""Exception and warning types raised across the package."""


class DataError(ValueError):
    """Input data is malformed or violates a dataset invariant."""


class EstimationError(RuntimeError):
    """An estimator could not produce a result for the given data."""


class ConvergenceError(EstimationError):
    def __init__(self, message, gradient_norm=None):
        super().__init__(message)
        self.gradient_norm = gradient_norm


class SeparationError(EstimationError):
    """Logistic fit has no finite maximum-likelihood estimate."""


class RankDeficiencyError(EstimationError):
    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column


class MonotonicityWarning(UserWarning):
    """Empirical responder rates contradict the monotonicity assumption."""


class ExtrapolationWarning(UserWarning):
    """A survival curve was extended flat beyond its observed range."""
