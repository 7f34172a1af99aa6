"""Exception hierarchy; maps onto the CLI exit codes."""


class CoverTreeError(Exception):
    """Base class for package errors."""


class ResourceLimitError(CoverTreeError):
    """Memory or feasibility guard tripped (exit code 3)."""


class CapExceededError(CoverTreeError):
    """A step or excursion cap was hit before the event of interest (exit 3)."""


class AccuracyError(CoverTreeError):
    """Requested estimate cannot reach the required accuracy (exit 3)."""


class DataError(CoverTreeError):
    """Degenerate or unusable input data (exit 3)."""


class SchemaConflictError(CoverTreeError):
    """Sample files with clashing keys or schema versions (exit 3)."""
