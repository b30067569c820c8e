"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes, so library code should raise
the most specific type that applies rather than bare ValueError.
"""


class TvaeError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(TvaeError):
    """Invalid, inconsistent, or incomplete configuration."""


class DataError(TvaeError):
    """Malformed dataset, video, clip, or container input."""


class NumericError(TvaeError):
    """Optimization produced a non-finite loss or objective."""

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []
