"""Exception taxonomy shared across the package."""


class MasaatError(Exception):
    """Base class for all errors raised by this package."""


class NumericError(MasaatError):
    """Non-finite values or numeric-domain violations (log of <= 0, etc.)."""


class ConfigError(MasaatError):
    """Invalid configuration: bad shapes, inconsistent dimensions, unknown keys."""


class IngestionError(MasaatError):
    """Malformed input files (missing columns, bad prices, unsorted dates)."""


class AlignmentError(MasaatError):
    """Asset calendars cannot be aligned onto a usable shared calendar."""


class RangeError(MasaatError):
    """A requested date/index range falls outside the available data."""


class TrainingError(MasaatError):
    """Training failed: non-finite gradients or rewards."""


class AccountingError(MasaatError):
    """Portfolio accounting produced an impossible state (non-positive value)."""


class ZeroVolatilityError(MasaatError):
    """Risk-adjusted metrics are undefined for a zero-volatility return series."""
