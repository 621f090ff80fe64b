"""Exception hierarchy shared by every stage."""


class ReviewIntelError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(ReviewIntelError, ValueError):
    """Input violates a documented precondition."""


class EmptyCorpusError(ValidationError):
    """No usable sentences remain after preprocessing."""


class StageDependencyError(ValidationError):
    """A pipeline stage was invoked before the stage it depends on."""
