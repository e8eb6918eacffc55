"""Behavioral simulator of a memristive reservoir computing system."""

from .errors import ConfigurationError, DataError, InputError, MemrcError, NumericalError

__version__ = "0.1.0"

__all__ = ["ConfigurationError", "DataError", "InputError", "MemrcError", "NumericalError"]
