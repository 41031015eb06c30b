"""Shared exception types; the CLI maps these onto exit codes."""


class FewIntentError(Exception):
    """Base class for errors raised by this package."""


class DataError(FewIntentError):
    """Bad input data: missing files, malformed rows, violated preconditions."""


class CheckpointError(DataError):
    """Unreadable or inconsistent checkpoint file."""


class NumericError(FewIntentError):
    """Numerical failure: NaN/Inf parameters, diverging training loss."""
