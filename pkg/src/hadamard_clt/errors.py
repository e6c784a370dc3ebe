"""Exception types shared across the package."""


class HadamardCltError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParameter(HadamardCltError, ValueError):
    """A scalar parameter is outside its admissible range."""


class InvalidInput(HadamardCltError, ValueError):
    """An input object (vector, density, stats table) is malformed."""


class DegenerateCondition(HadamardCltError):
    """Conditioning on a value of (numerically) zero probability density."""

    def __init__(self, message, mass=0.0):
        super().__init__(message)
        self.mass = mass


class BudgetExceeded(HadamardCltError):
    """The requested experiment exceeds the configured compute budget."""

    def __init__(self, message, feasible_depth):
        super().__init__(message)
        self.feasible_depth = feasible_depth


class InvalidModel(HadamardCltError, ValueError):
    """A side-information model cannot produce integrable conditionals."""


class ConfigError(HadamardCltError, ValueError):
    """A configuration file failed to parse or validate."""
