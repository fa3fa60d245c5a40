"""
errors.py

Exception hierarchy shared by the services, the CLI and the MCP server.
Everything derives from HarError so the boundaries can catch one type.
"""


class HarError(Exception):
    """Base class for every error raised by this package"""


class DimensionError(HarError):
    """Vectors or matrices of incompatible shapes were combined"""


class AcquisitionError(HarError):
    """A dataset file could not be found or downloaded"""


class IntegrityError(HarError):
    """Dataset files disagree with each other (row counts, listings)"""


class DataValidationError(HarError):
    """
    A dataset value is malformed or out of range.

    Attributes:
        line_number: 1-based line in the offending file, when known
    """
    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class ConfigurationError(HarError):
    """A hyperparameter, option or path is invalid"""


class CoverageError(HarError):
    """A class the model must cover has no training samples"""


class DegenerateProblemError(HarError):
    """The training problem cannot be posed (e.g. one label only)"""


class CorruptionError(HarError):
    """Model parameters are not finite"""


class DivergenceError(HarError):
    """
    Training produced a non-finite loss.

    Attributes:
        epoch: 1-based epoch at which the loss stopped being finite
    """
    def __init__(self, message: str, epoch: int):
        super().__init__(f"epoch {epoch}: {message}")
        self.epoch = epoch


class EmptyEvaluationError(HarError):
    """Metrics were requested over zero predictions"""
