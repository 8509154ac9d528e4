"""Exception hierarchy shared by all projlim modules."""


class ProjlimError(Exception):
    """Base class for every error raised by this package."""


class NotPositiveDefinite(ProjlimError):
    """Cholesky factorisation broke down.

    ``pivot`` is the 1-based index of the failing pivot.
    """

    def __init__(self, pivot, message=None):
        self.pivot = pivot
        super().__init__(message or f"matrix is not positive definite (pivot {pivot})")


class LevelConstructionError(ProjlimError):
    """Building the marginal at some level of a chain failed."""

    def __init__(self, level, cause):
        self.level = level
        self.cause = cause
        super().__init__(f"level {level}: {cause}")


class NormEvaluationError(ProjlimError):
    """A family member could not be integrated at the given level."""

    def __init__(self, level, cause):
        self.level = level
        self.cause = cause
        super().__init__(f"norm evaluation failed at level {level}: {cause}")


class NonFiniteValue(ProjlimError):
    def __init__(self, index, value):
        self.index = index
        self.value = value
        super().__init__(f"non-finite entry {value!r} at index {index}")


class DegreeGuardError(ProjlimError):
    pass


class EnumerationGuardError(ProjlimError):
    pass


class IllConditionedNormalization(ProjlimError):
    """Monte Carlo estimate of the partition function is indistinguishable from 0."""


class DimensionMismatch(ProjlimError, ValueError):
    pass
