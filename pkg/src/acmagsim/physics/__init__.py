"""Phase accumulation, signal model and the density-matrix oracle."""

from acmagsim.physics.phase import (
    PhaseResult,
    approximate_resonant_slope,
    closed_form_phase,
    evaluate_phase,
    modulation_function,
    non_accumulation_time,
    phase_derivative,
    quadrature_phase_oracle,
)
from acmagsim.physics.signal import (
    CoherenceEnvelope,
    coherence_envelope,
    expected_signal,
    measurement_variance,
    minimum_detectable_phase,
    phase_sensitivity,
    phase_shift_limit,
    projected_phase_sensitivity,
    signal_deviation_exact,
    signal_deviation_linear,
    snr,
)

__all__ = [
    "PhaseResult",
    "approximate_resonant_slope",
    "closed_form_phase",
    "evaluate_phase",
    "modulation_function",
    "non_accumulation_time",
    "phase_derivative",
    "quadrature_phase_oracle",
    "CoherenceEnvelope",
    "coherence_envelope",
    "expected_signal",
    "measurement_variance",
    "minimum_detectable_phase",
    "phase_sensitivity",
    "phase_shift_limit",
    "projected_phase_sensitivity",
    "signal_deviation_exact",
    "signal_deviation_linear",
    "snr",
]
