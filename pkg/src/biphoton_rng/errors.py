"""Exception hierarchy shared by the whole package.

Exit codes used by the CLI: 1 usage error, 2 data error, 3 numeric failure.
"""


class BiphotonError(Exception):
    """Base class for all package errors."""

    exit_code = 3


class UsageError(BiphotonError):
    """An operation was called in a way its contract forbids."""

    exit_code = 1


class ConfigError(UsageError):
    """Invalid configuration values (ranges, missing settings, ...)."""


class DataError(BiphotonError):
    """Input data violates the expected format or is unusable."""

    exit_code = 2


class ParseError(DataError):
    """Malformed record in a stream or series file (carries line/offset)."""

    def __init__(self, message, line=None, offset=None):
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if offset is not None:
            loc.append(f"offset {offset}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.line = line
        self.offset = offset


class OrderingError(DataError):
    """Timestamps in a stream are not sorted."""


class MissingTriggerError(DataError):
    """Pulse assignment requested but no trigger timestamps available."""


class TooShortError(DataError):
    """Series is too short for the requested operation."""


class DegenerateSeriesError(DataError):
    """Series is constant (or binarization would emit a constant image)."""


class NumericError(BiphotonError):
    """A numerical procedure failed (singular regression, zero variance, ...)."""

    exit_code = 3
