"""Exception hierarchy for the simulator."""

from typing import Any, Dict, Optional


class CqedSimError(Exception):
    """Base class for all simulator errors."""

    pass


class ConfigValidationError(CqedSimError, ValueError):
    """Raised when a configuration or operation argument is invalid.

    Attributes:
        key: Dotted configuration key that caused the failure, if known
    """

    def __init__(self, message: str, key: Optional[str] = None):
        self.key = key
        if key:
            message = f"{key}: {message}"
        super().__init__(message)


class BranchSelectionError(ConfigValidationError):
    """Raised when a bistable operating point is used without choosing a branch."""

    pass


class NumericalError(CqedSimError):
    """Raised when a numerical procedure fails to produce a result."""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        self.diagnostics = diagnostics or {}
        if self.diagnostics:
            details = ", ".join(f"{k}={v}" for k, v in self.diagnostics.items())
            message = f"{message} ({details})"
        super().__init__(message)


class RootNotFoundError(NumericalError):
    """Raised when the steady-state root scan finds no sign change."""

    pass


class StiffnessError(NumericalError):
    """Raised when the adaptive integrator step size underflows."""

    pass


class UndefinedSensitivityError(CqedSimError):
    """Raised when sensitivity is requested at a point with zero signal."""

    pass
