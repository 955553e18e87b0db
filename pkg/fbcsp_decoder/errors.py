"""
Exception types raised by the decoding toolkit.
"""


class DecoderError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(DecoderError, ValueError):
    """Invalid parameter value (band edges, filter counts, thresholds...)."""


class DatasetError(DecoderError, ValueError):
    """Malformed or inconsistent data."""


class NumericalError(DecoderError, ArithmeticError):
    """A matrix decomposition or solve could not be carried out."""


class LeakageError(DatasetError):
    """A fold plan trained on test or rejected trials, or did not predict every trial once."""
