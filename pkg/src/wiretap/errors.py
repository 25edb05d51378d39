"""Exception types shared across the package."""


class WiretapError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(WiretapError, ValueError):
    """Input violates a documented precondition (bad shape, normalization, names)."""


class CapExceededError(ValidationError):
    """A dense evaluation would exceed the configured size cap."""


class SchemaError(ValidationError):
    """A JSON document does not follow the expected schema."""


class NumericFailure(WiretapError):
    """A numeric check failed (e.g. an identity residual above tolerance)."""
