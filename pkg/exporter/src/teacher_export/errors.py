"""Error taxonomy for the exporter."""


class ExportError(Exception):
    """Base class for all exporter failures."""


class UsageError(ExportError):
    """Bad manifest or flags: unknown teacher, count mismatch, empty input."""


class ModelLoadError(ExportError):
    """A teacher backend could not be constructed."""


class DecodeError(ExportError):
    """An input row could not be decoded; the failing row is reported."""
