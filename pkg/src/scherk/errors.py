"""Exception hierarchy shared by the solvers and the command line."""


class ScherkError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class ValidationError(ScherkError, ValueError):
    exit_code = 2


class InvalidLatticeError(ValidationError):
    pass


class SymmetryError(ValidationError):
    pass


class ConfigError(ValidationError):
    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class InputSizeError(ValidationError):
    pass


class InjectivityError(ValidationError):
    pass


class GeometryError(ScherkError):
    exit_code = 3


class ConvergenceError(ScherkError):
    exit_code = 3


class DivergenceError(ConvergenceError):
    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history or [])


class AssemblyError(ScherkError):
    exit_code = 3


class TailTooShortError(ScherkError):
    exit_code = 3
