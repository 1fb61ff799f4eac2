"""Exception types raised by the library."""


class BergmanLabError(Exception):
    """Base class for library errors."""


class InvalidArgumentError(BergmanLabError, ValueError):
    pass


class DegreeError(InvalidArgumentError):
    """Requested moment order is not supported by the space dimension."""


class NotInXError(BergmanLabError, ValueError):
    """Point lies outside the strict-subharmonicity set {Laplacian Q > 0}."""


class UnsupportedWeightError(BergmanLabError, TypeError):
    """Weight lacks the bivariate extension required by the operation."""


class DomainError(BergmanLabError, ZeroDivisionError):
    """b0 vanishes where b1 was requested."""


class ConditioningError(BergmanLabError):
    def __init__(self, message, condition_number=float("nan"), rank=None):
        super().__init__(f"{message} (condition number ~ {condition_number:.3e}, rank={rank})")
        self.condition_number = condition_number
        self.rank = rank


class GrowthViolationError(BergmanLabError):
    """No droplet radius found in the search bracket."""


class SolverFailureError(BergmanLabError):
    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(f"{message} (residual={residual:.3e}, iterations={iterations})")
        self.residual = residual
        self.iterations = iterations


class DomainTooSmallError(BergmanLabError):
    """The computed droplet reaches the boundary ring of the grid."""


class ConfigError(BergmanLabError):
    def __init__(self, message, path=()):
        loc = "/".join(str(p) for p in path) or "<root>"
        super().__init__(f"{loc}: {message}")
        self.path = tuple(path)
