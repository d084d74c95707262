"""Shared exception types.

Every error that stems from bad data (rather than bad usage) derives from
DataError so the CLI can map it to a single exit code.
"""


class DataError(Exception):
    """Base class for data-level failures (CLI exit code 2)."""
