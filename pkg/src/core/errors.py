"""
Exception hierarchy for the quasicrystal laboratory.
Every failure the numerical modules raise on purpose derives from LabError.
"""

from typing import Optional


class LabError(Exception):
    """Base class for all laboratory errors."""


class SpecValidationError(LabError):
    """A ModelSpec (or settings entry) failed validation."""

    def __init__(self, key: Optional[str], message: str):
        self.key = key
        prefix = f"{key}: " if key else ""
        super().__init__(f"{prefix}{message}")


class PlanValidationError(LabError):
    """A sweep plan failed validation before execution."""

    def __init__(self, key: Optional[str], message: str):
        self.key = key
        prefix = f"{key}: " if key else ""
        super().__init__(f"{prefix}{message}")


class PairingFailure(LabError):
    """Left/right eigenvectors could not be paired or bi-normalized."""


class BaseOnSpectrum(LabError):
    """The winding base energy coincides with an eigenvalue of H(theta)."""


class NonConvergent(LabError):
    """Adaptive flux refinement exceeded its point budget."""


class EmptyOccupation(LabError):
    """An occupation rule selected no states."""


class NoLocalizedStates(LabError):
    """No state crosses the IPR threshold anywhere in a sweep."""


class TooFewLevels(LabError):
    """Level statistics need at least three eigenvalues."""


class MemoryBudgetExceeded(LabError):
    """A sweep plan would not fit in the configured memory budget."""


class ComplexESWarning(UserWarning):
    """The correlation matrix spectrum carries non-negligible imaginary parts."""
