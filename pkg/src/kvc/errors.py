"""Exception hierarchy shared across the package.

Every error raised on purpose derives from :class:`KvcError`, so callers
(and the CLI exit-code mapping) can distinguish our failures from bugs.
"""


class KvcError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(KvcError):
    """Input values violate a documented invariant (non-finite frames,
    bad labels, empty reference transcript, ...)."""


class DegenerateInputError(ValidationError):
    """A vector that must have nonzero Euclidean norm is (numerically) zero."""


class FormatError(KvcError):
    """A byte stream does not conform to the feature-file format."""


class TruncationError(FormatError):
    """A feature file ends before its declared payload does."""


class ConfigError(KvcError):
    """Incompatible dimensions or unsupported configuration values."""


class EmptySetError(KvcError):
    """An operation that needs a non-empty matching set got an empty one."""


class InsufficientDataError(KvcError):
    """Not enough data to satisfy the request (k > N in strict mode,
    a speaker without companion utterances, a job with nothing to do)."""
