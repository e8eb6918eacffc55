"""Exception types shared across the package.

Each maps onto one CLI exit code (see ``memrc.cli``).
"""


class MemrcError(Exception):
    exit_code = 1


class ConfigurationError(MemrcError, ValueError):
    """Invalid parameters or inconsistent configuration."""

    exit_code = 1


class InputError(MemrcError, ValueError):
    """Non-finite or malformed numeric input."""

    exit_code = 1


class DomainError(InputError):
    pass


class ReadDisturbError(ConfigurationError):
    """Read voltage would move the device state."""


class DataError(MemrcError):
    """Missing, truncated or unparseable data files."""

    exit_code = 2


class WavParseError(DataError):
    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class NumericalError(MemrcError, ArithmeticError):
    """NaN/inf encountered during training or integration."""

    exit_code = 3
