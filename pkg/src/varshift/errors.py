"""Exception types shared across the package."""


class VarshiftError(Exception):
    """Base class for all package errors."""


class ParameterError(VarshiftError, ValueError):
    """An argument is outside its documented domain."""


class DegenerateSampleError(VarshiftError, ValueError):
    """A sample carries no usable scale information (e.g. all zeros, one point)."""


class NumericalError(VarshiftError, ArithmeticError):
    """An iterative numerical routine failed to converge."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class DetectorStateError(VarshiftError, RuntimeError):
    """A detector was used before it was ready."""


class ConvergenceError(VarshiftError, RuntimeError):
    """The ICSS refinement pass did not settle within the pass cap."""

    def __init__(self, message: str, candidates: list[int]):
        super().__init__(message)
        self.candidates = list(candidates)


class InputError(VarshiftError, ValueError):
    """Malformed user input (CSV, config file, series too short)."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
