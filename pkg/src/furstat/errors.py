"""Exception hierarchy shared by the library and the CLI."""


class FurstatError(Exception):
    """Base class; ``exit_code`` is what the CLI returns for it."""

    exit_code = 3


class MalformedInputError(FurstatError, ValueError):
    exit_code = 3


class ValidationError(FurstatError):
    exit_code = 1

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class UnsupportedWordError(FurstatError, KeyError):
    exit_code = 3

    def __str__(self):
        return str(self.args[0]) if self.args else "unsupported word"


class BudgetError(FurstatError):
    exit_code = 2


class ResolutionError(FurstatError):
    exit_code = 2


class SolverError(FurstatError, RuntimeError):
    exit_code = 1

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


class RangeError(FurstatError, ValueError):
    exit_code = 3
