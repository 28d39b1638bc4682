"""Exception hierarchy shared across the package."""


class SeqVQEError(Exception):
    """Base class for all package errors."""


class InvalidModelError(SeqVQEError, ValueError):
    pass


class ResourceLimitError(SeqVQEError):
    """A dense representation would exceed the supported size."""


class DomainError(SeqVQEError, ValueError):
    pass


class InvalidRatesError(DomainError):
    pass


class UnsupportedBasisError(SeqVQEError, ValueError):
    pass


class SingularSystemError(SeqVQEError, ValueError):
    pass


class UnderdeterminedFitError(SeqVQEError, ValueError):
    pass


class FitQualityError(SeqVQEError):
    pass


class ConfigError(SeqVQEError, ValueError):
    pass


class SpsaAbort(SeqVQEError):
    """Raised when the objective returns a non-finite value.

    The offending iteration record is attached as ``record``.
    """

    def __init__(self, message, record=None):
        super().__init__(message)
        self.record = record
