"""Exception types shared across the package."""


class EtrError(Exception):
    """Base class for all errors raised by etr_approx."""


class DimensionError(EtrError, ValueError):
    """A vector or tensor axis does not have the expected length."""

    def __init__(self, message, variable=None, expected=None, got=None):
        super().__init__(message)
        self.variable = variable
        self.expected = expected
        self.got = got


class UnassignedVariableError(EtrError, KeyError):
    """An evaluation was requested without a value for some variable."""

    def __init__(self, variable):
        super().__init__(variable)
        self.variable = variable

    def __str__(self):
        return f"variable {self.variable!r} has no assigned value"


class ArithmeticRangeError(EtrError, OverflowError):
    """A construction needs magnitudes the chosen arithmetic cannot hold."""


class SchemaError(EtrError, ValueError):
    """Malformed instance file; ``field`` points at the offending entry."""

    def __init__(self, message, field=None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


class BudgetError(EtrError):
    """A requested enumeration exceeds the allowed number of grid points."""
