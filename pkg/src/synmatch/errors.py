"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: DataError -> 2, NumericError -> 3,
anything usage-related -> 1.
"""


class SynmatchError(Exception):
    """Base class for all package errors."""


class ShapeError(SynmatchError, ValueError):
    """Operands have incompatible dimensions."""


class NumericError(SynmatchError, ArithmeticError):
    """A computation produced a non-finite value."""


class DataError(SynmatchError, ValueError):
    """Unusable input data (files, vocabularies, stores)."""


class NoContextError(DataError):
    """An entity has no corpus occurrence to retrieve contexts from."""


class UnknownEntityError(DataError):
    """An entity name is absent from the vocabulary or store."""


class MetricError(SynmatchError, ValueError):
    """A metric is undefined for the given inputs (e.g. single-class AUC)."""
