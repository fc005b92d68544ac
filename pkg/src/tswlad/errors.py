"""Exception types; each carries the CLI exit code it maps to."""


class TswladError(Exception):
    exit_code = 1


class ConfigError(TswladError, ValueError):
    exit_code = 2


class DataError(TswladError, ValueError):
    exit_code = 3


class NumericalError(TswladError, ArithmeticError):
    exit_code = 4

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace or []
