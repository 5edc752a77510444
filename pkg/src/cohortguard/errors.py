"""Exception hierarchy shared across the toolkit.

The split mirrors the CLI exit codes: structural file problems
(:class:`FormatError`, exit 3), semantic invariant violations
(:class:`ValidationError`, exit 1) and metrics that cannot be computed
on the given data (:class:`UndefinedMetricError`, exit 2).
"""


class CohortGuardError(Exception):
    """Base class for all toolkit errors."""


class FormatError(CohortGuardError):
    """A file is structurally unreadable: bad magic, bad version,
    truncated payload, or an unparseable manifest line."""


class ValidationError(CohortGuardError):
    """Data parsed fine but violates a documented invariant."""


class EmptyScopeError(ValidationError):
    """A pairing scope selected no samples."""


class UnknownLanguageError(ValidationError):
    """Language code missing from the built-in proximity table."""


class UndefinedMetricError(CohortGuardError):
    """EER and related rates need at least one positive and one
    negative trial pair."""


class CalibrationError(UndefinedMetricError):
    """A target error rate is finer than the score set can resolve.

    ``achievable`` carries the smallest nonzero rate the data supports.
    """

    def __init__(self, message: str, achievable: float):
        super().__init__(message)
        self.achievable = achievable
