"""Exception types shared across the package."""


class FacMarketError(Exception):
    """Base class for all package errors."""


class DataError(FacMarketError):
    """Malformed or inconsistent input data."""


class InvalidRegion(DataError):
    """A region token outside the fixed enumeration."""


class DuplicateId(DataError):
    """An identifier appears more than once where uniqueness is required."""


class UnknownInstitution(DataError):
    """A faculty row references an institution that was never declared."""


class ZeroMarginal(DataError):
    """A contingency table has an all-zero row or column."""


class NumericalError(FacMarketError):
    """A numerical procedure failed to produce a usable result."""
