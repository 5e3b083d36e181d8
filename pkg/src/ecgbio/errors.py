"""Exception types shared across the package."""


class EcgBioError(Exception):
    """Base class for all package errors."""


class DomainError(EcgBioError, ValueError):
    """An argument violates an operation's precondition."""


class ShapeError(DomainError):
    """Array shapes are incompatible for the requested operation."""


class ConfigError(EcgBioError, ValueError):
    """A configuration object is internally inconsistent."""


class FormatError(EcgBioError, ValueError):
    """A file does not conform to its declared on-disk format."""


class UnsupportedOperationError(DomainError):
    """The request is valid input but outside what this pipeline supports."""


class UsageError(EcgBioError, RuntimeError):
    """An API was called in a way that cannot produce a meaningful result."""


class NumericError(EcgBioError, ArithmeticError):
    """A numeric computation diverged (NaN or infinite loss)."""
