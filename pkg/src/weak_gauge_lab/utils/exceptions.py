"""
Custom exceptions for Weak Gauge Lab.

This module defines the lab-specific exception hierarchy so that callers can
tell configuration problems from numerical failures.
"""

from typing import Optional


class WeakGaugeLabError(Exception):
    """Base exception for Weak Gauge Lab."""

    def __init__(self, message: str, details: Optional[str] = None) -> None:
        super().__init__(message)
        self.message = message
        self.details = details

    def to_record(self) -> dict:
        """Machine-readable description of the failure."""
        return {
            "type": type(self).__name__,
            "message": self.message,
            "details": self.details,
        }


class GridError(WeakGaugeLabError):
    """Exception raised for grid construction or compatibility problems."""
    pass


class GridMismatch(GridError):
    """Exception raised when two fields live on different grids or times."""
    pass


class BoxTooSmall(GridError):
    """Exception raised when a state is clipped by the simulation box."""

    def __init__(self, message: str, boundary_amplitude: float, details: Optional[str] = None) -> None:
        super().__init__(message, details)
        self.boundary_amplitude = boundary_amplitude


class GaugeError(WeakGaugeLabError):
    """Exception raised for gauge construction or transformation problems."""
    pass


class GaugeMixing(GaugeError):
    """Exception raised when fields expressed in different gauges are combined."""
    pass


class StateError(WeakGaugeLabError):
    """Exception raised when a state cannot be constructed."""
    pass


class ZeroState(StateError):
    """Exception raised when normalizing a field with zero norm."""
    pass


class UnknownState(StateError):
    """Exception raised for an unregistered reference packet id."""
    pass


class NumericalError(WeakGaugeLabError):
    """Exception raised when a numerical procedure fails."""
    pass


class UnstableStep(NumericalError):
    """Exception raised when the explicit stepper violates its stability bound."""
    pass


class NumericalBlowup(NumericalError):
    """Exception raised when non-finite amplitudes appear."""

    def __init__(self, message: str, step: Optional[int] = None, details: Optional[str] = None) -> None:
        super().__init__(message, details)
        self.step = step


class BoundaryLeak(NumericalError):
    """Exception raised when amplitude reaches the box edges."""
    pass


class TrajectoryLost(NumericalError):
    """Exception raised when a trajectory leaves the unmasked region."""

    def __init__(self, message: str, t: float, details: Optional[str] = None) -> None:
        super().__init__(message, details)
        self.t = t


class NearZeroVelocity(NumericalError):
    """Exception raised when a sensor divides by a vanishing velocity."""
    pass


class OperatorError(WeakGaugeLabError):
    """Exception raised when an operator cannot act on a field."""
    pass


class ContextRequired(OperatorError):
    """Exception raised when an operator needs an electromagnetic scenario."""
    pass


class UnsupportedOperator(OperatorError):
    """Exception raised for operator/field combinations without a grid action."""
    pass


class ConfigurationError(WeakGaugeLabError):
    """Exception raised when a scenario configuration is invalid."""

    def __init__(
        self,
        message: str,
        details: Optional[str] = None,
        line: Optional[int] = None,
        key_path: Optional[str] = None,
    ) -> None:
        super().__init__(message, details)
        self.line = line
        self.key_path = key_path

    def to_record(self) -> dict:
        record = super().to_record()
        record["line"] = self.line
        record["key_path"] = self.key_path
        return record


class ResultsStoreError(WeakGaugeLabError):
    """Exception raised when result files cannot be written."""
    pass
