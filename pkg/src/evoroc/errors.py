class EvorocError(Exception):
    """Base class for domain errors raised by this package."""


class ShapeError(EvorocError, ValueError):
    """A tensor dimension does not match what an operation requires."""


class AucUndefinedError(EvorocError, ValueError):
    """AUC requested for a single-class score set."""


class SplitError(EvorocError, ValueError):
    """A dataset split violates its contract (empty, or single-class)."""


class FormatError(EvorocError, ValueError):
    """A serialized file failed validation (magic, version, truncation, checksum)."""
