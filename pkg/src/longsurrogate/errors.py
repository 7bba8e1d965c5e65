"""Exception hierarchy shared by every module.

Each error carries a module-qualified message and maps to a CLI exit code.
"""


class LongSurrogateError(Exception):
    """Base class for all package errors."""

    exit_code = 1

    def __init__(self, message, module=None):
        self.module = module
        prefix = f"[{module}] " if module else ""
        super().__init__(prefix + message)


class ArgumentError(LongSurrogateError, ValueError):
    """An argument violates a documented precondition."""

    exit_code = 2


class ConfigError(LongSurrogateError):
    """Run configuration is malformed or inconsistent."""

    exit_code = 2


class DataError(LongSurrogateError):
    """Input data is malformed (duplicates, missing cells, bad values)."""

    exit_code = 3


class SchemaError(DataError):
    """A required column is missing from an input file."""


class DesignViolationError(DataError):
    """The panel breaks the constant-assignment design."""


class SingularDesignError(LongSurrogateError):
    """A regression design is rank deficient.

    Attributes
    ----------
    columns : tuple of int
        Column indices found to be linearly dependent on earlier columns.
    """

    exit_code = 4

    def __init__(self, message, columns=(), module="numerics"):
        self.columns = tuple(int(c) for c in columns)
        super().__init__(message, module=module)


class ConvergenceError(LongSurrogateError):
    """An iterative solver hit its iteration cap."""

    exit_code = 4

    def __init__(self, message, iterations, module="numerics"):
        self.iterations = int(iterations)
        super().__init__(message, module=module)


class EstimationError(LongSurrogateError):
    """An estimator could not produce a result."""

    exit_code = 4


class InferenceError(LongSurrogateError):
    """Resampling inference failed (too many failed replicates)."""

    exit_code = 4


class DiagnosticError(LongSurrogateError):
    """A validation test has no usable strata or matched pairs."""

    exit_code = 4
