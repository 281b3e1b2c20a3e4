"""Exception hierarchy shared by every sfnet module."""


class SFNetError(Exception):
    """Base class for all errors raised by sfnet."""


class ConfigError(SFNetError):
    """Invalid configuration, e.g. a sample rate other than 48 kHz."""


class DataError(SFNetError, ValueError):
    """Malformed input data (non-finite samples, bad audio files)."""


class DimensionError(SFNetError, ValueError):
    """Array shapes or channel counts do not line up."""


class StateError(SFNetError, RuntimeError):
    """An object was used in the wrong state (compression flag, closed stream)."""


class DomainError(SFNetError, ValueError):
    """Input outside the mathematical domain of an operation (silent signals)."""
