"""Exception hierarchy shared by all pipeline stages.

The CLI maps these onto process exit codes: usage errors exit 1, data
errors exit 2, numeric errors exit 3.
"""


class LigasError(Exception):
    """Base class for all errors raised by this package."""


class UsageError(LigasError):
    """Invalid invocation: bad flag values, impossible configuration."""


class DataError(LigasError):
    """Malformed or inconsistent input data: files, trees, alignments."""


class ShapeError(DataError):
    """Tensor operands with incompatible shapes."""


class NumericError(LigasError):
    """Non-finite values encountered during evaluation or training."""
