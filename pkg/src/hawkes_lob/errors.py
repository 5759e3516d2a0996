"""Exception types shared across the package."""


class HawkesLOBError(Exception):
    """Base class for package errors."""


class ValidationError(HawkesLOBError, ValueError):
    """Invalid parameters, configuration or precondition."""


class StabilityError(ValidationError):
    """Hawkes branching matrix has spectral radius >= 1."""


class PreconditionError(ValidationError):
    """An event or operation is not legal for the current state."""


class NotPSDError(ValidationError):
    """Matrix is indefinite beyond round-off tolerance."""


class NumericalError(HawkesLOBError, RuntimeError):
    """Non-finite values, rate explosion or iteration failure."""
