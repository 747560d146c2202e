"""Exception hierarchy shared by every module."""


class GGTIError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(GGTIError, ValueError):
    """Invalid input: a model spec, matrix, configuration or argument.

    The CLI maps this class to exit code 1.
    """

    def __init__(self, message, violations=None):
        super().__init__(message)
        self.violations = list(violations) if violations else [message]


class MatrixFormatError(ValidationError):
    """A matrix or outcome file does not follow the text format."""


class ScaleError(GGTIError):
    """An exhaustive routine was asked to run beyond its size guard."""


class DecoderContractError(GGTIError):
    """A block decoder returned a vector larger than the sparsity cap."""


class TrialError(GGTIError):
    """Wraps an error raised inside one experiment trial."""

    def __init__(self, trial, cause):
        super().__init__(f"trial {trial}: {cause}")
        self.trial = trial
        self.cause = cause
