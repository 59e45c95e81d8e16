"""Exception types shared across the package.

The CLI maps these onto exit codes: parameter/usage problems exit 2, data
problems exit 3, violated internal invariants exit 1.
"""


class DpmeError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(DpmeError, ValueError):
    """An argument is outside its documented domain (bad alpha, shape mismatch, ...)."""


class PartitionError(ParameterError):
    """A cell partition does not tile the real line with disjoint intervals."""


class DataError(DpmeError, ValueError):
    """Input data cannot be used (malformed CSV, wrong shape, non-numeric cell)."""


class DegenerateDataError(DataError):
    """Data is structurally unusable: identical points, zero-variance column."""


class InvariantError(DpmeError, RuntimeError):
    """An internal consistency check failed; indicates a bug, not a user error."""
