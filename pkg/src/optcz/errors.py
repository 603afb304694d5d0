"""Exception types raised across the package."""


class OptczError(Exception):
    """Base class for all package errors."""


class DimensionError(OptczError, ValueError):
    pass


class ShapeError(DimensionError):
    pass


class UnsupportedMultiplicityError(OptczError, ValueError):
    pass


class SymmetryError(OptczError, ValueError):
    pass


class DomainError(OptczError, ValueError):
    pass


class DegenerateDesignError(DomainError):
    """Raised when a design quantity is requested at phi = 0, where it is undefined."""


class OptimizationFailure(OptczError, RuntimeError):
    """No restart converged. ``best`` holds the incumbent ``(p_s, B)``."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class ExtinctionError(OptczError, ArithmeticError):
    pass


class ConfigError(OptczError, ValueError):
    pass


class CompletenessError(OptczError, ValueError):
    def __init__(self, message, missing=()):
        super().__init__(message)
        self.missing = list(missing)


class IterationLimitError(OptczError, RuntimeError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class CalibrationError(OptczError, ValueError):
    pass


class ConsistencyError(OptczError, ValueError):
    pass


class FormulaDomainError(OptczError, ValueError):
    pass
