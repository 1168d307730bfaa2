"""acmagsim - AC magnetometry simulator for dynamical-decoupling spin sensors."""

__version__ = "0.1.0"

# Public API exports
from acmagsim.model.models import (
    AcField,
    DecouplingSequence,
    PulseAxis,
    Readout,
    SensorEnsemble,
    SequenceFamily,
)
from acmagsim.model.params import build_sequence, default_sensor, resonance_tau
from acmagsim.physics.phase import closed_form_phase, quadrature_phase_oracle
from acmagsim.physics.signal import expected_signal, snr

__all__ = [
    "AcField",
    "DecouplingSequence",
    "PulseAxis",
    "Readout",
    "SensorEnsemble",
    "SequenceFamily",
    "build_sequence",
    "closed_form_phase",
    "default_sensor",
    "expected_signal",
    "quadrature_phase_oracle",
    "resonance_tau",
    "snr",
    "__version__",
]
