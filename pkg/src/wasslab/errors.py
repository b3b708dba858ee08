"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """A descriptor or solver setting is malformed or unsafe."""


class DomainError(ValueError):
    """An operation was called outside its mathematical domain."""


class NumericError(ArithmeticError):
    """A computation produced non-finite values."""
