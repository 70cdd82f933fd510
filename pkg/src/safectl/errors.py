"""Exception hierarchy shared across the package."""


class SafeCtlError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(SafeCtlError, ValueError):
    pass


class NonStabilizable(SafeCtlError):
    """Riccati iteration diverged or the closed loop is not stable."""


class NotPD(SafeCtlError, ArithmeticError):
    """Cholesky factorization failed after exhausting the jitter ladder."""


class NonFiniteState(SafeCtlError, FloatingPointError):
    pass


class EpisodeOver(SafeCtlError, RuntimeError):
    pass


class UnsupportedShape(SafeCtlError, ValueError):
    pass


class UnsupportedSystem(SafeCtlError, ValueError):
    pass


class NegativeMargin(SafeCtlError, ValueError):
    pass


class DegenerateDistribution(SafeCtlError, ValueError):
    pass


class Diverged(SafeCtlError, RuntimeError):
    """iLQR regularization ladder exhausted."""


class ConfigError(SafeCtlError):
    """Base for configuration problems (CLI exit code 2)."""


class ParseError(ConfigError):
    pass


class SchemaError(ConfigError):
    def __init__(self, message, path=()):
        self.path = tuple(path)
        where = ".".join(str(p) for p in self.path) or "<root>"
        super().__init__(f"{where}: {message}")
