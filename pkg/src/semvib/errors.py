"""Exception types shared across the package."""


class SemVibError(Exception):
    """Base class for all package errors."""


class ConfigError(SemVibError):
    """Invalid or missing configuration (CLI exit code 2)."""


class DataError(SemVibError):
    """Malformed dataset files or inconsistent views (CLI exit code 3)."""


class NumericError(SemVibError):
    """Non-finite or degenerate value during optimization (CLI exit code 4).

    ``term`` names the loss term that produced the bad value.
    """

    def __init__(self, message: str, term: str | None = None):
        super().__init__(message)
        self.term = term


class CheckpointError(SemVibError):
    """Corrupt, truncated, or incompatible checkpoint file."""

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message)
        self.offset = offset
