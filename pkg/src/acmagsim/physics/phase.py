"""Phase accumulated by a spin under a pi-pulse train and a sinusoidal field.

With u = pi f tau (1 + alpha) and w = alpha pi f tau (the half pulse width in
field phase), the modulation timeline integrates in closed form to

    even N:  Phi =  (gamma B / pi f) cos(N u + phase) sin(N u) (1 - cos w / cos u)
    odd N:   Phi = -(gamma B / pi f) sin(N u + phase) cos(N u) (1 - cos w / cos u)

Both have a removable singularity where cos u = 0, i.e. where pulse centers
sit half a field period apart. Inside |cos u| < EPS_RES the singular ratio is
replaced by its L'Hopital limit:

    sin(N u) / cos u  ->  -N cos(N u) / sin u      (N even)
    cos(N u) / cos u  ->   N sin(N u) / sin u      (N odd)

The quadrature oracle integrates the same timeline numerically, segment by
segment, and shares nothing with the closed form beyond the pulse layout.
"""

from dataclasses import dataclass
from typing import Optional, Tuple
import math

import numpy as np
from scipy.optimize import brentq

from acmagsim.constants import (
    DEFAULT_NODES_PER_HALF_PERIOD,
    EPS_RES,
    GAMMA_E,
    MIN_NODES_PER_HALF_PERIOD,
)
from acmagsim.errors import InvalidParameterError, ResonanceError
from acmagsim.logging_config import LogTags, logger
from acmagsim.model.models import AcField, DecouplingSequence, SequenceFamily
from acmagsim.model.params import build_sequence, resonance_tau
from acmagsim.physics.quadrature import intervals_for, simpson_richardson


@dataclass(frozen=True)
class PhaseResult:
    """Accumulated phase and its derivative with respect to the field phase."""
    phi: float
    at_resonance: bool      # analytic-limit branch taken
    dphi_dphase: float
    even_n: bool = True


def phase_kernel(gamma_b, frequency, phase, n_pulses, tau, pi_width,
                 eps_res: float = EPS_RES) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized closed form. All arguments broadcast against each other.

    Args:
        gamma_b: gamma_e * B_ac in rad/s.
        frequency: Field frequency in Hz.
        phase: Total field phase in radians.
        n_pulses: Pulse count N (integer array or scalar).
        tau: Free spacing in seconds.
        pi_width: Pi pulse width in seconds.
        eps_res: Width of the resonance band on |cos u|.

    Returns:
        Tuple of (phi, dphi_dphase, at_resonance) arrays.
    """
    gamma_b = np.asarray(gamma_b, dtype=float)
    frequency = np.asarray(frequency, dtype=float)
    phase = np.asarray(phase, dtype=float)
    n = np.asarray(n_pulses, dtype=int)
    tau = np.asarray(tau, dtype=float)
    pi_width = np.asarray(pi_width, dtype=float)

    u = math.pi * frequency * (tau + pi_width)
    cos_w = np.cos(math.pi * frequency * pi_width)
    cos_u = np.cos(u)
    sin_u = np.sin(u)
    nu = n * u
    sin_nu = np.sin(nu)
    cos_nu = np.cos(nu)
    scale = gamma_b / (math.pi * frequency)

    at_res = np.abs(cos_u) < eps_res
    even = (n % 2) == 0
    safe_cos_u = np.where(at_res, 1.0, cos_u)
    safe_sin_u = np.where(at_res, sin_u, 1.0)

    even_ratio = np.where(at_res, -n * cos_nu / safe_sin_u, sin_nu / safe_cos_u)
    odd_ratio = np.where(at_res, n * sin_nu / safe_sin_u, cos_nu / safe_cos_u)
    even_factor = sin_nu - cos_w * even_ratio
    odd_factor = cos_nu - cos_w * odd_ratio

    lead_cos = np.cos(nu + phase)
    lead_sin = np.sin(nu + phase)
    phi = np.where(even, scale * lead_cos * even_factor, -scale * lead_sin * odd_factor)
    dphi = np.where(even, -scale * lead_sin * even_factor, -scale * lead_cos * odd_factor)
    return phi, dphi, np.broadcast_to(at_res, phi.shape)


def evaluate_phase(field: AcField, seq: DecouplingSequence,
                   gamma_e: float = GAMMA_E, eps_res: float = EPS_RES) -> PhaseResult:
    """Closed-form phase, derivative and branch flag for one sequence."""
    phi, dphi, at_res = phase_kernel(gamma_e * field.amplitude, field.frequency, field.phase,
                                     seq.n_pulses, seq.tau, seq.pi_width, eps_res)
    even = seq.n_pulses % 2 == 0
    if not even:
        logger.warning(LogTags.PHASE, "%s has odd N=%d; using the odd-parity closed form",
                       seq.name, seq.n_pulses)
    if bool(at_res):
        logger.debug(LogTags.PHASE, "%s at resonance (tau=%.6g s); analytic limit branch",
                     seq.name, seq.tau)
    return PhaseResult(phi=float(phi), at_resonance=bool(at_res),
                       dphi_dphase=float(dphi), even_n=even)


def closed_form_phase(field: AcField, seq: DecouplingSequence,
                      gamma_e: float = GAMMA_E, eps_res: float = EPS_RES) -> float:
    """Accumulated phase Phi in radians."""
    return evaluate_phase(field, seq, gamma_e, eps_res).phi


def phase_derivative(field: AcField, seq: DecouplingSequence,
                     gamma_e: float = GAMMA_E, eps_res: float = EPS_RES) -> float:
    """Exact dPhi/d(phase); only the leading trigonometric factor depends on the phase."""
    return evaluate_phase(field, seq, gamma_e, eps_res).dphi_dphase


def phase_curve(free_times, field: AcField, seq: DecouplingSequence,
                gamma_e: float = GAMMA_E,
                eps_res: float = EPS_RES) -> Tuple[np.ndarray, np.ndarray]:
    """Phi and dPhi/d(phase) over a sweep of N tau at fixed N and pulse width.

    Args:
        free_times: Array of N tau values in seconds.
        field: Field; its amplitude, frequency and phase are used.
        seq: Sequence template; its tau is replaced by free_times / N.

    Returns:
        Tuple of (phi, dphi_dphase) arrays.
    """
    free_times = np.asarray(free_times, dtype=float)
    tau = free_times / seq.n_pulses
    if np.any(tau <= seq.pi_width):
        raise InvalidParameterError(
            f"every N tau must exceed N * pi_width = {seq.n_pulses * seq.pi_width:.6g} s")
    phi, dphi, _ = phase_kernel(gamma_e * field.amplitude, field.frequency, field.phase,
                                seq.n_pulses, tau, seq.pi_width, eps_res)
    return phi, dphi


def is_resonant(field: AcField, seq: DecouplingSequence, eps_res: float = EPS_RES) -> bool:
    """True when |cos(pi f tau (1 + alpha))| is inside the resonance band."""
    return abs(math.cos(math.pi * field.frequency * seq.spacing)) < eps_res


def approximate_resonant_slope(field: AcField, seq: DecouplingSequence,
                               gamma_e: float = GAMMA_E, eps_res: float = EPS_RES) -> float:
    """(-1)^(N+1) (2/pi) gamma B N tau (1 + alpha), the short-pulse resonant slope.

    It omits the cos(alpha pi f tau) factor of the exact limit, so it differs
    from ``phase_derivative`` at phase pi/2 by that factor.

    Raises:
        ResonanceError: If the sequence is not at resonance.
    """
    if not is_resonant(field, seq, eps_res):
        raise ResonanceError(
            f"{seq.name} with tau={seq.tau:.6g} s is off resonance for f={field.frequency:.6g} Hz")
    sign = -1.0 if seq.n_pulses % 2 == 0 else 1.0
    return sign * (2.0 / math.pi) * gamma_e * field.amplitude * seq.total_time


def modulation_function(seq: DecouplingSequence, t: float) -> int:
    """Sign of the phase accrual at time t: +1, -1, or 0 inside a pulse window.

    Raises:
        InvalidParameterError: If t is outside [0, T].
    """
    if not 0.0 <= t <= seq.total_time:
        raise InvalidParameterError(f"t={t} outside the sequence window [0, {seq.total_time}]")
    flips = 0
    for pulse in seq.pulses:
        if pulse.start <= t <= pulse.end:
            return 0
        if pulse.end < t:
            flips += 1
    return -1 if flips % 2 else 1


def segment_phase_increments(field: AcField, seq: DecouplingSequence,
                             nodes_per_half_period: int = DEFAULT_NODES_PER_HALF_PERIOD,
                             gamma_e: float = GAMMA_E) -> np.ndarray:
    """gamma_e times the integral of B(t) over each free segment, unsigned.

    Returns:
        Array of length N + 1 in timeline order.
    """
    if nodes_per_half_period < MIN_NODES_PER_HALF_PERIOD:
        raise InvalidParameterError(
            f"nodes_per_half_period must be >= {MIN_NODES_PER_HALF_PERIOD}, "
            f"got {nodes_per_half_period}")
    increments = np.empty(seq.n_pulses + 1)
    for k, seg in enumerate(seq.free_segments):
        n = intervals_for(seg.duration, field.frequency, nodes_per_half_period)
        increments[k] = gamma_e * simpson_richardson(field.value, seg.start, seg.end, n)
    return increments


def quadrature_phase_oracle(field: AcField, seq: DecouplingSequence,
                            nodes_per_half_period: int = DEFAULT_NODES_PER_HALF_PERIOD,
                            gamma_e: float = GAMMA_E) -> float:
    """Phi by numerical integration of the modulated field over the timeline."""
    increments = segment_phase_increments(field, seq, nodes_per_half_period, gamma_e)
    signs = np.array([seg.sign for seg in seq.free_segments], dtype=float)
    return float(np.dot(signs, increments))


def non_accumulation_time(field: AcField, family: SequenceFamily, repetitions: int,
                          pi_width: float,
                          bracket: Optional[Tuple[float, float]] = None,
                          gamma_e: float = GAMMA_E) -> float:
    """N tau at which Phi crosses zero next to the resonant spacing.

    The default bracket spans +-0.4 rad of u around resonance, which holds
    exactly one sign change for phase pi/2.

    Returns:
        Root in seconds, located to 1e-18 s.
    """
    template = build_sequence(family, repetitions, resonance_tau(field.frequency, pi_width),
                              pi_width)
    n = template.n_pulses
    if bracket is None:
        center = template.free_precession_time
        half_width = n * 0.4 / (math.pi * field.frequency)
        lower = max(center - half_width, n * pi_width * (1 + 1e-9) + 1e-15)
        bracket = (lower, center + half_width)

    def phi_at(free_time: float) -> float:
        return closed_form_phase(field, template.with_tau(free_time / n), gamma_e)

    a, b = bracket
    if phi_at(a) * phi_at(b) > 0:
        raise InvalidParameterError(
            f"no sign change of the phase in N tau bracket [{a:.6g}, {b:.6g}] s")
    root = brentq(phi_at, a, b, xtol=1e-18, rtol=4 * np.finfo(float).eps, maxiter=200)
    logger.log(LogTags.PHASE, "%s phase zero at N tau = %.9g s", template.name, root)
    return float(root)
