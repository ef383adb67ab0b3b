"""Exception hierarchy shared by every subpackage."""


class BatchRLError(Exception):
    """Base class for all errors raised by batchrl."""


class ConfigError(BatchRLError, ValueError):
    """Unknown names, out-of-range hyperparameters, mismatched env/reward pairs."""


class InputShapeError(BatchRLError, ValueError):
    pass


class InputError(BatchRLError, ValueError):
    """Non-finite or otherwise invalid numeric input."""


class UsageError(BatchRLError, RuntimeError):
    pass


class PhaseError(BatchRLError, RuntimeError):
    pass


class TrainingDivergenceError(BatchRLError, ArithmeticError):
    def __init__(self, message, step=None):
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)
        self.step = step


class FormatError(BatchRLError, ValueError):
    """Bad magic bytes or unsupported version in a binary file."""


class CorruptionError(BatchRLError, ValueError):
    """Truncated or internally inconsistent binary file."""


class ReportError(BatchRLError, ValueError):
    pass
