"""Exception hierarchy; the CLI maps each family to an exit status."""


class LocalUlamError(Exception):
    exit_code = 3


class ConfigError(LocalUlamError, ValueError):
    exit_code = 1


class DataError(LocalUlamError, ValueError):
    exit_code = 2


class NumericalError(LocalUlamError, ArithmeticError):
    exit_code = 3


class EmptyPatchError(ConfigError):
    """No bin centre lies inside the patch."""


class TotalEscapeError(NumericalError):
    """Every test point of a step left the domain."""
