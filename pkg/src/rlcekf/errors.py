"""Exception hierarchy. Exit codes of the command line map onto these classes."""


class RlcEkfError(Exception):
    exit_code = 1


class ConfigurationError(RlcEkfError, ValueError):
    exit_code = 1


class DataError(RlcEkfError, ValueError):
    exit_code = 2


class SchemaError(DataError):
    pass


class PolicyFormatError(DataError):
    pass


class NumericalError(RlcEkfError, ArithmeticError):
    exit_code = 3


class CorrectionError(NumericalError):
    """Innovation covariance too ill-conditioned to invert; the frame can be skipped."""


class FilterDivergenceError(NumericalError):
    pass


class TrainingError(NumericalError):
    """Non-finite loss during training; ``snapshot`` holds the diagnostic state."""

    def __init__(self, message, snapshot=None):
        super().__init__(message)
        self.snapshot = snapshot or {}
