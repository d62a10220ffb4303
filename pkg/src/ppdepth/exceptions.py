"""Exception and warning types raised across ppdepth.

Every validation error derives from :class:`ValidationError` (itself a
``ValueError``) so callers and the CLI can catch them in one place.
"""


class ValidationError(ValueError):
    """Invalid input to a ppdepth routine."""


class ParseError(ValidationError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DomainMismatch(ValidationError):
    pass


class InvalidRate(ValidationError):
    pass


class InvalidIntensity(ValidationError):
    pass


class CapExceeded(ValidationError):
    pass


class EmptyDataset(ValidationError):
    pass


class EmptyRealization(ValidationError):
    pass


class PoolEmpty(ValidationError):
    pass


class NonMonotoneMeans(ValidationError):
    def __init__(self, message, k=None):
        self.k = k
        super().__init__(message)


class MissingCardinality(ValidationError):
    def __init__(self, k):
        self.k = k
        super().__init__(f"no conditional model for cardinality {k}")


class DimensionMismatch(ValidationError):
    pass


class InsufficientData(ValidationError):
    pass


class DegenerateComponentWarning(UserWarning):
    """A Poisson-mixture component collapsed and was dropped."""


class MeanRepairWarning(UserWarning):
    """Bootstrap conditional means were adjusted to restore strict ordering."""


class ZeroDepthWarning(UserWarning):
    """A depth was forced to zero because a model component was missing."""
