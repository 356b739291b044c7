"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: data errors exit 3, constraint
errors exit 4. ConstraintError subclasses ValueError so library callers
catching ValueError keep working.
"""


class SnclustError(Exception):
    """Base class for all errors raised by this package."""


class DataFormatError(SnclustError):
    """A file could not be parsed or violates its declared format."""


class ConstraintError(SnclustError, ValueError):
    """An operation precondition or invariant was violated."""
