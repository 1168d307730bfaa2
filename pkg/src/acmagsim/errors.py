"""Exception hierarchy for the simulator.

Every error raised on purpose by acmagsim derives from ``AcMagError``, which
is itself a ``ValueError`` so that callers treating bad input generically keep
working.
"""

from __future__ import annotations

from typing import TYPE_CHECKING, List, Optional

if TYPE_CHECKING:
    from acmagsim.model.models import FitResult
    from acmagsim.model.validator import Violation


class AcMagError(ValueError):
    """Base class for all simulator errors."""

    code = "error"

    def to_dict(self) -> dict:
        """Machine-readable form used by the CLI and the web view."""
        return {"error": self.code, "message": str(self)}


class InvalidParameterError(AcMagError):
    """A physical or numerical parameter is outside its domain."""

    code = "invalid_parameter"


class ResonanceError(AcMagError):
    """An operation that requires the resonance condition got an off-resonance input."""

    code = "not_at_resonance"


class MissingCoherenceError(AcMagError):
    """No coherence entry exists (or can be interpolated) for a pulse count."""

    code = "missing_coherence"

    def __init__(self, n_pulses: int, available: List[int]):
        self.n_pulses = n_pulses
        self.available = list(available)
        super().__init__(
            f"no coherence entry for N={n_pulses}; table covers N={self.available}"
        )

    def to_dict(self) -> dict:
        data = super().to_dict()
        data["n_pulses"] = self.n_pulses
        data["available"] = self.available
        return data


class DegenerateContrastError(AcMagError):
    """Bright and dark photon rates are equal, so there is no optical contrast."""

    code = "degenerate_contrast"


class ZeroVarianceError(AcMagError):
    """A reference sample has zero spread, so an SNR cannot be formed."""

    code = "zero_variance"


class NonFiniteModelError(AcMagError):
    """A model evaluation produced NaN or infinity."""

    code = "non_finite_model"


class FitError(AcMagError):
    """Base class for estimation failures."""

    code = "fit_failed"


class ConvergenceError(FitError):
    """The optimizer ran out of iterations. Carries the last iterate."""

    code = "not_converged"

    def __init__(self, message: str, result: Optional["FitResult"] = None):
        super().__init__(message)
        self.result = result


class SingularJacobianError(FitError):
    """J^T W J could not be inverted."""

    code = "singular_jacobian"


class ConfigError(AcMagError):
    """A scenario configuration failed validation."""

    code = "invalid_config"

    def __init__(self, violations: List["Violation"]):
        self.violations = list(violations)
        lines = [f"{v.path}: {v.message}" for v in self.violations]
        super().__init__("invalid configuration: " + "; ".join(lines))

    def to_dict(self) -> dict:
        data = super().to_dict()
        data["violations"] = [v.to_dict() for v in self.violations]
        return data


class OutputError(AcMagError):
    """Result files could not be written."""

    code = "output_failed"
