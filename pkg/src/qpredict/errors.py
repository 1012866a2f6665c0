"""Exception hierarchy shared by all modules.

Each class carries the exit code the command-line front end reports for it.
"""


class QPredictError(Exception):
    exit_code = 1
    category = "error"


class ValidationError(QPredictError, ValueError):
    """Malformed input: bad machine definition, out-of-range symbol, etc."""

    exit_code = 1
    category = "validation"


class ZeroProbabilityError(ValidationError):
    """A history that the process (or model) assigns probability zero."""

    category = "zero-probability"


class NumericalError(QPredictError, ArithmeticError):
    """Degenerate spectrum, singular fixed point, non-convergence."""

    exit_code = 2
    category = "numerical"


class TrainingFailedError(NumericalError):
    category = "training-failed"


class GuardError(QPredictError):
    """An enumeration would exceed the desk-scale size guard."""

    exit_code = 3
    category = "guard"
