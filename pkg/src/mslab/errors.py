"""Exception hierarchy shared by every mslab module."""


class MSLabError(Exception):
    """Base class for all mslab errors."""


class UsageError(MSLabError, ValueError):
    """Invalid argument, point of the wrong kind, inconsistent configuration."""


class StateError(MSLabError, RuntimeError):
    """An object is used before a required calibration step."""


class NumericalError(MSLabError, ArithmeticError):
    """A numerical procedure failed; ``payload`` carries diagnostics."""

    def __init__(self, message, **payload):
        super().__init__(message)
        self.payload = payload


class DivergenceError(NumericalError):
    """A seminorm or norm estimate does not settle (u outside the function class)."""
