"""Exception hierarchy. Every error carries a machine-readable ``category``."""


class RobustHvacError(Exception):
    category = "error"
    exit_code = 1


class ValidationError(RobustHvacError, ValueError):
    category = "validation"
    exit_code = 3


class ConfigError(ValidationError):
    """Invalid configuration file; ``line`` points at the offending entry when known."""

    category = "config"

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class DataError(ValidationError):
    category = "data"
    exit_code = 4


class NumericError(RobustHvacError, ArithmeticError):
    category = "numeric"
    exit_code = 5


class SolverError(RobustHvacError):
    category = "solver"
    exit_code = 5


class IoError(RobustHvacError):
    """Reading or writing a report file failed; the message names the path."""

    category = "io"
    exit_code = 6
