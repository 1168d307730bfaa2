"""Default parameters, coherence tables and sequence construction."""
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple
import math

from acmagsim.constants import (
    DEFAULT_BRIGHT_RATE,
    DEFAULT_DARK_RATE,
    DEFAULT_NV_COUNT,
    GAMMA_E,
)
from acmagsim.errors import InvalidParameterError, ResonanceError
from acmagsim.model.models import (
    AcField,
    CoherenceEntry,
    DecouplingSequence,
    Readout,
    SensorEnsemble,
    SequenceFamily,
)


# Measured stretched-exponential decays, keyed by pulse count N.
# N = 1, 32, 128, 256 come from in-phase decays with Hahn and CPMG-k;
# N = 2, 4, 8 from the CPMG-2, XY4-1 and XY8-1 magnetometry sequences.
DEFAULT_COHERENCE_TABLE: Dict[int, CoherenceEntry] = {
    1: CoherenceEntry(t2=74e-6, p=0.95, t2_error=3e-6, p_error=0.04),
    2: CoherenceEntry(t2=95e-6, p=1.11, t2_error=4e-6, p_error=0.06),
    4: CoherenceEntry(t2=124e-6, p=1.21, t2_error=5e-6, p_error=0.08),
    8: CoherenceEntry(t2=140e-6, p=0.97, t2_error=10e-6, p_error=0.09),
    32: CoherenceEntry(t2=340e-6, p=1.3, t2_error=10e-6, p_error=0.1),
    128: CoherenceEntry(t2=650e-6, p=1.2, t2_error=20e-6, p_error=0.1),
    256: CoherenceEntry(t2=1.2e-3, p=1.7, t2_error=0.1e-3, p_error=0.4),
}

# Dark/bright photon ratio r measured alongside each magnetometry sequence
SEQUENCE_RATE_RATIOS: Dict[int, float] = {
    2: 0.892,
    4: 0.908,
    8: 0.917,
}

# Sequences whose in-phase decays were used to tabulate T2(N)
COHERENCE_SEQUENCES: Tuple[Tuple[SequenceFamily, int], ...] = (
    (SequenceFamily.HAHN, 1),
    (SequenceFamily.CPMG, 32),
    (SequenceFamily.CPMG, 128),
    (SequenceFamily.CPMG, 256),
)


@dataclass
class ReferenceParams:
    """Reference experiment: XY8-1 against a 200 kHz, 0.74 uT field."""
    frequency: float = 200e3
    amplitude: float = 0.74e-6
    initial_phase: float = math.pi / 2
    family: SequenceFamily = SequenceFamily.XY8
    repetitions: int = 1
    pi_width: float = 124e-9
    n_nv: int = DEFAULT_NV_COUNT
    bright_rate: float = DEFAULT_BRIGHT_RATE
    dark_rate: float = DEFAULT_DARK_RATE
    gamma_e: float = GAMMA_E
    coherence: Dict[int, CoherenceEntry] = field(
        default_factory=lambda: dict(DEFAULT_COHERENCE_TABLE))

    def ac_field(self, phase_shift: float = 0.0) -> AcField:
        return AcField(amplitude=self.amplitude, frequency=self.frequency,
                       initial_phase=self.initial_phase, phase_shift=phase_shift)

    def sequence(self, tau: Optional[float] = None) -> DecouplingSequence:
        if tau is None:
            tau = resonance_tau(self.frequency, self.pi_width)
        return build_sequence(self.family, self.repetitions, tau, self.pi_width)

    def sensor(self) -> SensorEnsemble:
        return SensorEnsemble(bright_rate=self.bright_rate, dark_rate=self.dark_rate,
                              n_nv=self.n_nv, gamma_e=self.gamma_e,
                              coherence_table=dict(self.coherence))


def resonance_tau(f_ac: float, pi_width: float) -> float:
    """Free spacing tau that puts pulse centers half a field period apart.

    Args:
        f_ac: Field frequency in Hz.
        pi_width: Pi pulse width in seconds.

    Returns:
        tau such that tau + pi_width = 1 / (2 f_ac).

    Raises:
        ResonanceError: If the half period is not longer than the pulse width.
    """
    if not f_ac > 0:
        raise InvalidParameterError(f"field frequency must be > 0, got {f_ac}")
    if pi_width < 0:
        raise InvalidParameterError(f"pi pulse width must be >= 0, got {pi_width}")
    half_period = 0.5 / f_ac
    if not half_period > pi_width:
        raise ResonanceError(
            f"half period {half_period:.6g} s is not longer than pi pulse width "
            f"{pi_width:.6g} s; no resonant spacing exists")
    return half_period - pi_width


def build_sequence(family: SequenceFamily, repetitions: int, tau: float,
                   pi_width: float = 0.0,
                   readout: Readout = Readout.QUADRATURE) -> DecouplingSequence:
    """Build a sequence; N = unit length x repetitions.

    Hahn has a one-pulse unit (X), CPMG a one-pulse unit (Y), XY4 and XY8
    four and eight pulses.
    """
    if isinstance(family, str):
        family = SequenceFamily.parse(family)
    return DecouplingSequence(family=family, repetitions=repetitions, tau=tau,
                              pi_width=pi_width, readout=readout)


def contrast(sensor: SensorEnsemble) -> float:
    """Shot-noise contrast C = [1 + 2 (r0 + r1) / (r0 - r1)^2]^(-1/2)."""
    return sensor.contrast


def default_sensor(n_nv: int = DEFAULT_NV_COUNT,
                   rate_ratio: Optional[float] = None) -> SensorEnsemble:
    """Reference ensemble: 60 NVs, C = 0.03, r = 0.917 and the merged coherence table.

    Args:
        n_nv: Number of NV centers contributing photons.
        rate_ratio: Optional r = r1/r0 to use instead of the default, keeping r0.
    """
    dark = DEFAULT_DARK_RATE if rate_ratio is None else rate_ratio * DEFAULT_BRIGHT_RATE
    return SensorEnsemble(bright_rate=DEFAULT_BRIGHT_RATE, dark_rate=dark,
                          n_nv=n_nv, gamma_e=GAMMA_E,
                          coherence_table=dict(DEFAULT_COHERENCE_TABLE))
