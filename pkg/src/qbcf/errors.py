"""Exception and warning types shared across the package."""


class NotPositiveDefinite(ValueError):
    """A matrix that must be positive definite is not (Cholesky pivot <= 0)."""


class InvalidInterval(ValueError):
    """Truncation interval with lower >= upper."""


class AllWeightsZero(ArithmeticError):
    """Every kernel weight underflowed at the query point."""


class DegenerateFirstStage(RuntimeError):
    """More than the tolerated share of observations had zero kernel mass."""


class SingularPoint(ValueError):
    """The Design-I link function is undefined at z = -1."""


class InsufficientReplications(RuntimeError):
    """Too few successful bootstrap replications to form an interval."""


class ZeroStandardError(RuntimeError):
    """A bootstrap replication carries a zero posterior standard error."""


class ExcessiveFailures(RuntimeError):
    """More than 10% of bootstrap replications failed; results unusable."""


class MaxIterationsExceeded(RuntimeError):
    """Optimizer hit its iteration cap. Carries the best point found."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class IllConditionedWarning(UserWarning):
    """Dataset quirk (e.g. an alternative never chosen) that degrades inference."""
