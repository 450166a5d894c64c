"""Exception hierarchy shared by all modules."""


class ETCAbsError(Exception):
    pass


class DimensionError(ETCAbsError, ValueError):
    pass


class ContractError(ETCAbsError, ValueError):
    """An input violates a documented precondition (e.g. asymmetry)."""


class DegenerateHullError(ETCAbsError):
    """All hull points are affinely dependent; bloat the cloud first."""


class InvalidSectorError(ETCAbsError, ValueError):
    pass


class UndefinedPointError(ETCAbsError, ValueError):
    pass


class HorizonExceededError(ETCAbsError):
    """No trigger on (0, sigma_bar]; the scan horizon must be raised."""

    def __init__(self, msg, sigma_bar=None):
        super().__init__(msg)
        self.sigma_bar = sigma_bar


class AbstractionFailure(ETCAbsError):
    """Even arbitrarily small inter-sample times cannot be certified."""


class AssemblyError(ETCAbsError):
    pass


class ConfigError(ETCAbsError, ValueError):
    def __init__(self, field, msg):
        super().__init__(f"{field}: {msg}")
        self.field = field
