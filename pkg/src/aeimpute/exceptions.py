"""Exception types raised across the package."""


class AeImputeError(Exception):
    """Base class for all package errors."""


class ConfigError(AeImputeError, ValueError):
    """Invalid configuration or parameter combination."""


class ParseError(AeImputeError, ValueError):
    """Malformed input file."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DataError(AeImputeError, ValueError):
    """Data that cannot be used for the requested operation."""


class RangeError(DataError):
    """A value lies outside its variable's normalization range."""


class NumericError(AeImputeError, ArithmeticError):
    """Non-finite values in a numeric computation."""


class TrainingError(NumericError):
    """Training diverged."""


class RoutingError(AeImputeError, ValueError):
    """A tree needs a predictor value that is missing."""


class ImputationError(AeImputeError):
    """Imputation of one record failed; ``record_index`` names it."""

    def __init__(self, record_index, cause):
        super().__init__(f"record {record_index}: {cause}")
        self.record_index = record_index
