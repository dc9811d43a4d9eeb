"""Exception hierarchy shared by every subpackage."""


class CoadaptError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(CoadaptError, ValueError):
    """Array dimensions do not compose."""


class NumericError(CoadaptError, ArithmeticError):
    """Non-finite values, iteration caps exceeded, or numerical divergence."""


class StabilityError(NumericError):
    """A fixed-point recursion is not contractive."""


class ConfigError(CoadaptError, ValueError):
    """Invalid or inconsistent configuration."""


class DomainError(CoadaptError, ValueError):
    """An argument lies outside the domain of an operation."""
