"""Exception types raised across the package."""


class StsmError(ValueError):
    """Base class for all package errors."""


class FormatError(StsmError):
    """An input file does not match its declared schema."""


class IntervalError(StsmError):
    """Timestamps are missing, unordered, or not evenly spaced."""


class ConfigError(StsmError):
    """A configuration value is out of range or inconsistent."""


class InputError(StsmError):
    """Invalid data passed to an operation (unknown ids, bad coordinates...)."""


class DivergenceError(StsmError):
    """Training produced a non-finite loss."""
