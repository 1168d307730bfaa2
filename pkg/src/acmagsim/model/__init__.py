"""Domain types, defaults and validation for the sensing experiment."""

from acmagsim.model.models import (
    AcField,
    CoherenceEntry,
    DecouplingSequence,
    FitResult,
    FreeSegment,
    Pulse,
    PulseAxis,
    Readout,
    SensorEnsemble,
    SequenceFamily,
    SignalPoint,
)
from acmagsim.model.params import (
    DEFAULT_COHERENCE_TABLE,
    ReferenceParams,
    build_sequence,
    contrast,
    default_sensor,
    resonance_tau,
)

__all__ = [
    "AcField",
    "CoherenceEntry",
    "DecouplingSequence",
    "FitResult",
    "FreeSegment",
    "Pulse",
    "PulseAxis",
    "Readout",
    "SensorEnsemble",
    "SequenceFamily",
    "SignalPoint",
    "DEFAULT_COHERENCE_TABLE",
    "ReferenceParams",
    "build_sequence",
    "contrast",
    "default_sensor",
    "resonance_tau",
]
