"""Exception hierarchy.

Each class carries the process exit code the CLI maps it to:
2 for configuration/usage problems, 3 for bad input data, 4 for numeric failures.
"""


class TfmsepError(Exception):
    exit_code = 1


class ParameterError(TfmsepError, ValueError):
    """An argument is outside its documented domain."""

    exit_code = 2


class ConfigError(ParameterError):
    """Invalid run configuration; ``field`` names the offending key path."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class UsageError(TfmsepError):
    exit_code = 2


class DegenerateParamsError(ParameterError):
    pass


class DataError(TfmsepError, ValueError):
    exit_code = 3


class FormatError(DataError):
    pass


class ChannelError(DataError):
    pass


class RateError(DataError):
    pass


class LengthError(DataError):
    pass


class ShapeError(DataError):
    pass


class DegenerateSignalError(DataError):
    pass


class DegenerateFeaturesError(DataError):
    pass


class DegenerateInputError(DataError):
    pass


class DegenerateReferencesError(DataError):
    pass


class WriteError(TfmsepError, OSError):
    exit_code = 3


class NumericError(TfmsepError, ArithmeticError):
    exit_code = 4


class UndefinedMetricError(NumericError):
    pass
