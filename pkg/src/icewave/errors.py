"""Exception types shared across the package."""


class IceWaveError(Exception):
    """Base class for all package errors."""


class DomainError(IceWaveError, ValueError):
    """An argument lies outside the admissible set (bad p, h_p <= 0, ...)."""


class ConditionFailedError(IceWaveError):
    """A solvability condition fails; carries the offending value.

    ``value`` is the limit / integral that violated the condition, so callers
    can report it (e.g. the depth-integral limit when laminar existence fails).
    """

    def __init__(self, message, value=None):
        super().__init__(message)
        self.value = value


class NumericalError(IceWaveError):
    """An iterative method failed to converge; carries diagnostics."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
