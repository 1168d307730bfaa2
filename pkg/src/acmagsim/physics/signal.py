"""Magnetometry signal, deviation, variance, SNR and sensitivity."""

from dataclasses import dataclass
from typing import Optional, Tuple
import math

import numpy as np

from acmagsim.constants import EPS_RES, GAMMA_E
from acmagsim.errors import InvalidParameterError, MissingCoherenceError, ResonanceError
from acmagsim.logging_config import LogTags, logger
from acmagsim.model.models import (
    AcField,
    DecouplingSequence,
    Readout,
    SensorEnsemble,
    SignalPoint,
)
from acmagsim.physics.phase import (
    approximate_resonant_slope,
    evaluate_phase,
    is_resonant,
    phase_curve,
)


@dataclass(frozen=True)
class CoherenceEnvelope:
    """Stretched-exponential envelope exp[-(N tau / T2)^p]."""
    t2: float
    p: float
    interpolated: bool = False

    def __post_init__(self):
        if not (self.t2 > 0 and self.p > 0):
            raise InvalidParameterError(
                f"coherence needs T2 > 0 and p > 0, got T2={self.t2}, p={self.p}")

    def decay_exponent(self, free_time):
        """D = (N tau / T2)^p for scalars or arrays."""
        return (np.asarray(free_time, dtype=float) / self.t2) ** self.p

    def envelope(self, free_time):
        return np.exp(-self.decay_exponent(free_time))


@dataclass(frozen=True)
class DeviationResult:
    """Exact signal change for a phase shift."""
    prefactored: float      # S(phase + dphi) - S(phase)
    unprefactored: float    # |sin Phi(phase + dphi) - sin Phi(phase)|


@dataclass(frozen=True)
class SnrResult:
    """Full shot-noise SNR and its long-time approximation."""
    full: float
    long_time: float


def coherence_envelope(sensor: SensorEnsemble, n_pulses: int) -> CoherenceEnvelope:
    """Look up (T2, p) for N, interpolating between tabulated pulse counts.

    Between neighbours N_a < N < N_b, log T2 and p are linear in log N.

    Raises:
        MissingCoherenceError: If N lies outside the tabulated range.
    """
    table = sensor.coherence_table
    if n_pulses in table:
        entry = table[n_pulses]
        return CoherenceEnvelope(entry.t2, entry.p)
    keys = sorted(table)
    if not keys or n_pulses < keys[0] or n_pulses > keys[-1]:
        raise MissingCoherenceError(n_pulses, keys)
    upper = next(k for k in keys if k > n_pulses)
    lower = max(k for k in keys if k < n_pulses)
    weight = (math.log(n_pulses) - math.log(lower)) / (math.log(upper) - math.log(lower))
    lo, hi = table[lower], table[upper]
    t2 = math.exp((1 - weight) * math.log(lo.t2) + weight * math.log(hi.t2))
    p = (1 - weight) * lo.p + weight * hi.p
    logger.warning(LogTags.SIGNAL, "coherence for N=%d interpolated between N=%d and N=%d",
                   n_pulses, lower, upper)
    return CoherenceEnvelope(t2, p, interpolated=True)


def readout_sign(seq: DecouplingSequence) -> float:
    """(-1)^(n_y+1) for quadrature readout, (-1)^(n_x+1) for in-phase readout."""
    count = seq.n_y if seq.readout is Readout.QUADRATURE else seq.n_x
    return -1.0 if count % 2 == 0 else 1.0


def _readout_trig(seq: DecouplingSequence, phi):
    """(sin Phi, d sin Phi / d Phi) or the cosine pair for in-phase readout."""
    if seq.readout is Readout.QUADRATURE:
        return np.sin(phi), np.cos(phi)
    return np.cos(phi), -np.sin(phi)


def spin_polarization(field: AcField, seq: DecouplingSequence, sensor: SensorEnsemble,
                      envelope: Optional[CoherenceEnvelope] = None) -> float:
    """<sigma_z> after the final pi/2 pulse, P(bright) - P(dark)."""
    if envelope is None:
        envelope = coherence_envelope(sensor, seq.n_pulses)
    result = evaluate_phase(field, seq, sensor.gamma_e)
    trig, _ = _readout_trig(seq, result.phi)
    decay = float(envelope.envelope(seq.free_precession_time))
    return readout_sign(seq) * decay * float(trig)


def expected_signal(field: AcField, seq: DecouplingSequence, sensor: SensorEnsemble) -> float:
    """Normalized differential signal S.

    Quadrature readout gives (-1)^(n_y+1) (1-r)/(1+r) exp(-D) sin Phi, in-phase
    readout (-1)^(n_x+1) (1-r)/(1+r) exp(-D) cos Phi.
    """
    return sensor.signal_prefactor * spin_polarization(field, seq, sensor)


def signal_curve(free_times, field: AcField, seq: DecouplingSequence,
                 sensor: SensorEnsemble,
                 envelope: Optional[CoherenceEnvelope] = None) -> np.ndarray:
    """expected_signal over a sweep of N tau at fixed N, pulse width and readout."""
    if envelope is None:
        envelope = coherence_envelope(sensor, seq.n_pulses)
    free_times = np.asarray(free_times, dtype=float)
    phi, _ = phase_curve(free_times, field, seq, sensor.gamma_e)
    trig, _ = _readout_trig(seq, phi)
    return readout_sign(seq) * sensor.signal_prefactor * envelope.envelope(free_times) * trig


def signal_deviation_linear(field: AcField, seq: DecouplingSequence,
                            sensor: SensorEnsemble, dphi: float) -> float:
    """First-order signal change dS/d(phase) * dphi at the field's current phase."""
    envelope = coherence_envelope(sensor, seq.n_pulses)
    result = evaluate_phase(field, seq, sensor.gamma_e)
    _, slope = _readout_trig(seq, result.phi)
    decay = float(envelope.envelope(seq.free_precession_time))
    return (readout_sign(seq) * sensor.signal_prefactor * decay
            * dphi * float(slope) * result.dphi_dphase)


def signal_deviation_exact(field: AcField, seq: DecouplingSequence,
                           sensor: SensorEnsemble, dphi: float) -> DeviationResult:
    """Exact S(phase + dphi) - S(phase), plus the bare |sin Phi' - sin Phi|."""
    shifted = field.shifted(dphi)
    prefactored = expected_signal(shifted, seq, sensor) - expected_signal(field, seq, sensor)
    phi0 = evaluate_phase(field, seq, sensor.gamma_e).phi
    phi1 = evaluate_phase(shifted, seq, sensor.gamma_e).phi
    return DeviationResult(prefactored=prefactored,
                           unprefactored=abs(math.sin(phi1) - math.sin(phi0)))


def deviation_curves(free_times, field: AcField, seq: DecouplingSequence,
                     sensor: SensorEnsemble, dphi: float) -> Tuple[np.ndarray, np.ndarray]:
    """Linearized and exact signal deviation over a sweep of N tau."""
    envelope = coherence_envelope(sensor, seq.n_pulses)
    free_times = np.asarray(free_times, dtype=float)
    phi, dphi_dphase = phase_curve(free_times, field, seq, sensor.gamma_e)
    _, slope = _readout_trig(seq, phi)
    prefactor = readout_sign(seq) * sensor.signal_prefactor * envelope.envelope(free_times)
    linear = prefactor * dphi * slope * dphi_dphase
    exact = (signal_curve(free_times, field.shifted(dphi), seq, sensor, envelope)
             - signal_curve(free_times, field, seq, sensor, envelope))
    return linear, exact


def linearized_deviation_magnitude(field: AcField, seq: DecouplingSequence,
                                   dphi: float, gamma_e: float = GAMMA_E) -> float:
    """|dphi * resonant slope| with unit prefactor, the straight line that meets |dS| = 1."""
    return abs(dphi * approximate_resonant_slope(field, seq, gamma_e))


def readout_variance(bright_rate: float, dark_rate: float, z):
    """Per-NV photon variance of one readout at spin polarization ``z``.

    Equal rates give the pure Poisson value r for every z.
    """
    mean = 0.5 * (bright_rate + dark_rate)
    half = 0.5 * (bright_rate - dark_rate)
    return mean + half * z + half ** 2 * (1.0 - z * z)


def measurement_variance(field: AcField, seq: DecouplingSequence,
                         sensor: SensorEnsemble) -> float:
    """Per-NV variance of one readout in photons^2.

    (r0+r1)/2 + (r0-r1)/2 z + (r0-r1)^2/4 (1 - z^2), where z is the spin
    polarization after the final pulse.
    """
    z = spin_polarization(field, seq, sensor)
    return float(readout_variance(sensor.bright_rate, sensor.dark_rate, z))


def snr(field: AcField, seq: DecouplingSequence, sensor: SensorEnsemble,
        dphi: float, n_measurements: int) -> SnrResult:
    """Shot-noise SNR of a phase shift dphi after N_m readouts.

    full = sqrt(N_m N_nv) |dS_photons| / sqrt(var), with dS_photons the
    linear deviation in photon units; long_time = sqrt(N_m N_nv) C exp(-D)
    |slope| |dphi|.
    """
    if n_measurements < 1:
        raise InvalidParameterError(f"n_measurements must be >= 1, got {n_measurements}")
    root_n = math.sqrt(n_measurements * sensor.n_nv)
    deviation = signal_deviation_linear(field, seq, sensor, dphi)
    photons = sensor.mean_rate * deviation
    full = root_n * abs(photons) / math.sqrt(measurement_variance(field, seq, sensor))

    envelope = coherence_envelope(sensor, seq.n_pulses)
    result = evaluate_phase(field, seq, sensor.gamma_e)
    _, slope = _readout_trig(seq, result.phi)
    decay = float(envelope.envelope(seq.free_precession_time))
    long_time = root_n * sensor.contrast * decay * abs(float(slope) * result.dphi_dphase) * abs(dphi)
    return SnrResult(full=full, long_time=long_time)


def phase_sensitivity(sensor: SensorEnsemble, b_ac: float, n_pulses: int) -> float:
    """eta_phi = pi e / (2 C gamma B sqrt(T2(N))) / sqrt(N_nv), in rad/sqrt(Hz).

    Raises:
        InvalidParameterError: If b_ac is not positive.
    """
    if not b_ac > 0:
        raise InvalidParameterError(f"phase sensitivity needs B_ac > 0, got {b_ac}")
    t2 = coherence_envelope(sensor, n_pulses).t2
    return (math.pi * math.e
            / (2.0 * sensor.contrast * sensor.gamma_e * b_ac * math.sqrt(t2))
            / math.sqrt(sensor.n_nv))


def minimum_detectable_phase(sensor: SensorEnsemble, b_ac: float, n_pulses: int,
                             total_time: float) -> float:
    """eta_phi / sqrt(T_t) for a total measurement time T_t in seconds."""
    if not total_time > 0:
        raise InvalidParameterError(f"total measurement time must be > 0, got {total_time}")
    return phase_sensitivity(sensor, b_ac, n_pulses) / math.sqrt(total_time)


def phase_shift_limit(field: AcField, seq: DecouplingSequence,
                      gamma_e: float = GAMMA_E, eps_res: float = EPS_RES) -> float:
    """Largest phase shift the linear response covers: (pi/2) / (gamma B N tau (1+alpha)).

    Raises:
        InvalidParameterError: If the field amplitude is zero.
        ResonanceError: If the sequence is off resonance.
    """
    if not field.amplitude > 0:
        raise InvalidParameterError("phase shift limit needs B_ac > 0")
    if not is_resonant(field, seq, eps_res):
        raise ResonanceError(f"{seq.name} is off resonance; the phase shift limit is undefined")
    return (math.pi / 2.0) / (gamma_e * field.amplitude * seq.total_time)


def signal_point(field: AcField, seq: DecouplingSequence, sensor: SensorEnsemble,
                 dphi: float, n_measurements: int) -> SignalPoint:
    """Every analytic quantity at one sweep point."""
    result = evaluate_phase(field, seq, sensor.gamma_e)
    ratio = snr(field, seq, sensor, dphi, n_measurements)
    return SignalPoint(
        free_precession_time=seq.free_precession_time,
        phase=result.phi,
        phase_derivative=result.dphi_dphase,
        at_resonance=result.at_resonance,
        signal=expected_signal(field, seq, sensor),
        deviation_linear=signal_deviation_linear(field, seq, sensor, dphi),
        deviation_exact=signal_deviation_exact(field, seq, sensor, dphi).prefactored,
        variance=measurement_variance(field, seq, sensor),
        snr=ratio.full,
        snr_long_time=ratio.long_time,
    )


def projected_phase_sensitivity(b_ac: float, n_nv: float, t2: float, contrast: float,
                                gamma_e: float = GAMMA_E) -> float:
    """eta_phi for a hypothetical ensemble given directly by (N_nv, T2, C).

    Used for sensitivity prospects beyond the tabulated sensor, e.g. a
    dense ensemble with N_nv ~ 1e11 and T2 = 100 us.
    """
    if not (b_ac > 0 and n_nv > 0 and t2 > 0 and 0 < contrast < 1):
        raise InvalidParameterError(
            "projection needs B_ac > 0, N_nv > 0, T2 > 0 and 0 < C < 1")
    return (math.pi * math.e / (2.0 * contrast * gamma_e * b_ac * math.sqrt(t2))
            / math.sqrt(n_nv))
