"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class RangeError(ValueError):
    """An argument lies outside a tabulated or simulated range."""


class NumericError(ArithmeticError):
    """A numerical routine failed to converge or lost an invariant."""


class ConfigError(ValueError):
    """A run configuration failed validation.

    Attributes:
        field: Name of the offending configuration field, if known.
    """

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field
