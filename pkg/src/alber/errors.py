"""Shared exception types for the alber package."""

from __future__ import annotations


class AlberError(Exception):
    """Base class for all package-specific errors."""


class ParameterError(AlberError, ValueError):
    """A function argument violates its documented precondition."""


class ConfigurationError(AlberError, ValueError):
    """A run configuration is inconsistent or physically invalid."""


class ValidationError(AlberError, ValueError):
    """A validation harness input violates its contract."""


class StepFailure(AlberError, RuntimeError):
    """A per-step linear solve failed to meet its residual contract.

    Attributes
    ----------
    residual : float
        Relative residual achieved before giving up.
    state : object or None
        Last good solver state, attached by the run loop when available.
    """

    def __init__(self, message: str, residual: float = float("nan"), state=None):
        super().__init__(message)
        self.residual = residual
        self.state = state


class IndeterminateWindingError(AlberError, RuntimeError):
    """The Nyquist curve passes too close to the target point."""


class ScanRangeError(AlberError, RuntimeError):
    """A stability scan exhausted its harmonic range while still unstable."""
