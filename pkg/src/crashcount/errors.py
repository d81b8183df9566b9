"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: DataError -> 3, NumericError -> 4.
"""


class CrashCountError(Exception):
    """Base class for all toolkit errors."""


class DataError(CrashCountError):
    """Invalid, missing or inconsistent input data."""


class NumericError(CrashCountError):
    """An estimation routine failed (non-convergence, singularity)."""
