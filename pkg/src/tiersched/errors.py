"""Exception types shared across the package."""


class TierschedError(Exception):
    """Base class for all package errors."""


class ValidationError(TierschedError, ValueError):
    """A domain invariant was violated (bad policy, negative time, ...)."""


class SchemaError(ValidationError):
    """A structured document is malformed; the message names the field."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class ConfigError(TierschedError, ValueError):
    """A scenario or command configuration is invalid."""
