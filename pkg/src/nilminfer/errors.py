"""Exception types shared across the package."""


class ParseError(ValueError):
    """A CSV row could not be parsed; carries the 1-based line number."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        super().__init__(message)


class GapError(ValueError):
    """A run of missing samples exceeded the configured maximum."""


class EmptyWindowError(ValueError):
    """A clock window selected no samples."""


class CoverageError(ValueError):
    """The series does not span enough time for the requested computation."""


class AlignmentError(ValueError):
    """Two windowed series do not share a common window grid."""


class DegenerateModelError(ValueError):
    """Model training collapsed to duplicate state levels."""


class CapacityError(ValueError):
    """The joint state space exceeds the exact-inference cap."""


class UndefinedStatisticError(ValueError):
    """A statistic is undefined for the given input (e.g. zero variance)."""


class ConfigurationError(ValueError):
    """An experiment was configured inconsistently with its inputs."""
