"""Two-level density-matrix propagation through a decoupling sequence.

Rotating-frame model: the field only rotates the spin about z during free
segments, pi and pi/2 pulses are ideal rotations placed at the pulse
centers, and decoherence is a single exp(-D) damping of the coherences at
the end of the train. Rotations follow U = exp(-i theta n.sigma / 2).
"""

from dataclasses import dataclass
from typing import Tuple
import math

import numpy as np

from acmagsim.constants import DEFAULT_NODES_PER_HALF_PERIOD, GAMMA_E
from acmagsim.errors import InvalidParameterError
from acmagsim.logging_config import LogTags, logger
from acmagsim.model.models import (
    AcField,
    DecouplingSequence,
    PulseAxis,
    Readout,
    SensorEnsemble,
)
from acmagsim.physics.phase import segment_phase_increments
from acmagsim.physics.signal import CoherenceEnvelope, coherence_envelope

IDENTITY = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)

AXIS_MATRICES = {
    PulseAxis.X: SIGMA_X,
    PulseAxis.Y: SIGMA_Y,
}

STATE_TOL = 1e-12
EQUATOR_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class SpinState:
    """Hermitian, unit-trace, positive 2x2 density matrix."""
    rho: np.ndarray

    def __post_init__(self):
        rho = np.array(self.rho, dtype=complex)
        if rho.shape != (2, 2):
            raise InvalidParameterError(f"density matrix must be 2x2, got {rho.shape}")
        if abs(np.trace(rho) - 1.0) > STATE_TOL:
            raise InvalidParameterError(f"trace {np.trace(rho)} differs from 1")
        if np.max(np.abs(rho - rho.conj().T)) > STATE_TOL:
            raise InvalidParameterError("density matrix is not Hermitian")
        eig = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
        if eig.min() < -STATE_TOL or eig.max() > 1 + STATE_TOL:
            raise InvalidParameterError(f"eigenvalues {eig} outside [0, 1]")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    @classmethod
    def from_bloch(cls, x: float, y: float, z: float) -> 'SpinState':
        return cls(0.5 * (IDENTITY + x * SIGMA_X + y * SIGMA_Y + z * SIGMA_Z))

    def expectation(self, operator: np.ndarray) -> float:
        return float(np.real(np.trace(self.rho @ operator)))

    @property
    def bloch_vector(self) -> Tuple[float, float, float]:
        return (self.expectation(SIGMA_X), self.expectation(SIGMA_Y),
                self.expectation(SIGMA_Z))

    @property
    def purity(self) -> float:
        return float(np.real(np.trace(self.rho @ self.rho)))

    def transformed(self, unitary: np.ndarray) -> 'SpinState':
        return SpinState(unitary @ self.rho @ unitary.conj().T)


@dataclass(frozen=True)
class MeasurementOperator:
    """M = a|0><0| + b|1><1| with per-NV bright and dark photon means."""
    bright: float
    dark: float

    @classmethod
    def from_sensor(cls, sensor: SensorEnsemble) -> 'MeasurementOperator':
        return cls(bright=sensor.bright_rate, dark=sensor.dark_rate)

    @property
    def matrix(self) -> np.ndarray:
        return np.diag([self.bright, self.dark]).astype(complex)


def rotation(axis: np.ndarray, angle: float) -> np.ndarray:
    """exp(-i angle axis.sigma / 2) for a Pauli-combination axis matrix."""
    return math.cos(angle / 2) * IDENTITY - 1j * math.sin(angle / 2) * axis


def initialize() -> SpinState:
    """Optically pumped |0><0| = (1 + sigma_z) / 2."""
    return SpinState(0.5 * (IDENTITY + SIGMA_Z))


def apply_rotation(state: SpinState, axis: PulseAxis, angle: float) -> SpinState:
    return state.transformed(rotation(AXIS_MATRICES[axis], angle))


def apply_half_pi(state: SpinState, axis: PulseAxis) -> SpinState:
    """Ideal pi/2 pulse; (pi/2)_X takes |0> to (1 - sigma_y) / 2."""
    return apply_rotation(state, axis, math.pi / 2)


def apply_pi(state: SpinState, axis: PulseAxis) -> SpinState:
    return apply_rotation(state, axis, math.pi)


def free_precession(state: SpinState, angle: float) -> SpinState:
    """Rotation about z by the accrued field phase."""
    return state.transformed(rotation(SIGMA_Z, angle))


def dephase(state: SpinState, decay: float) -> SpinState:
    """Scale the off-diagonal elements by ``decay``."""
    rho = state.rho.copy()
    rho[0, 1] *= decay
    rho[1, 0] *= decay
    return SpinState(rho)


def evolve_through_sequence(state: SpinState, field: AcField, seq: DecouplingSequence,
                            coherence: CoherenceEnvelope,
                            nodes_per_half_period: int = DEFAULT_NODES_PER_HALF_PERIOD,
                            gamma_e: float = GAMMA_E) -> SpinState:
    """Free segments and pi pulses in timeline order, then exp(-D) dephasing.

    Raises:
        InvalidParameterError: If the input state is not on the equator.
    """
    if abs(state.expectation(SIGMA_Z)) > EQUATOR_TOL:
        raise InvalidParameterError("sequence input must be an equatorial state")
    increments = segment_phase_increments(field, seq, nodes_per_half_period, gamma_e)
    pulses = seq.pulses
    for k, theta in enumerate(increments):
        state = free_precession(state, theta)
        if k < len(pulses):
            state = apply_pi(state, pulses[k].axis)
    decay = float(coherence.envelope(seq.free_precession_time))
    logger.debug(LogTags.DENSITY, "%s propagated through %d segments, exp(-D)=%.6g",
                 seq.name, len(increments), decay)
    return dephase(state, decay)


def measure_expectation(state: SpinState, sensor: SensorEnsemble) -> float:
    """<M> = Tr(M rho) per NV, in photons per readout."""
    return state.expectation(MeasurementOperator.from_sensor(sensor).matrix)


def final_pulse_axis(seq: DecouplingSequence) -> PulseAxis:
    """(pi/2)_Y reads the quadrature component, (pi/2)_X the in-phase one."""
    return PulseAxis.Y if seq.readout is Readout.QUADRATURE else PulseAxis.X


@dataclass(frozen=True)
class ReadoutPair:
    """Photon expectations for the pi/2 and 3pi/2 final-pulse branches."""
    branch_a: float
    branch_b: float

    @property
    def normalized_difference(self) -> float:
        return (self.branch_a - self.branch_b) / (self.branch_a + self.branch_b)


def simulate_readout_expectations(field: AcField, seq: DecouplingSequence,
                                  sensor: SensorEnsemble,
                                  nodes_per_half_period: int = DEFAULT_NODES_PER_HALF_PERIOD
                                  ) -> ReadoutPair:
    """Full pipeline: initialize, (pi/2)_X, sequence, final pi/2 or 3pi/2, measure."""
    coherence = coherence_envelope(sensor, seq.n_pulses)
    state = apply_half_pi(initialize(), PulseAxis.X)
    state = evolve_through_sequence(state, field, seq, coherence,
                                    nodes_per_half_period, sensor.gamma_e)
    axis = final_pulse_axis(seq)
    branch_a = measure_expectation(apply_rotation(state, axis, math.pi / 2), sensor)
    branch_b = measure_expectation(apply_rotation(state, axis, 3 * math.pi / 2), sensor)
    return ReadoutPair(branch_a, branch_b)


def density_matrix_signal(field: AcField, seq: DecouplingSequence, sensor: SensorEnsemble,
                          nodes_per_half_period: int = DEFAULT_NODES_PER_HALF_PERIOD) -> float:
    """Normalized differential signal (A - B) / (A + B) from the density-matrix path."""
    return simulate_readout_expectations(field, seq, sensor,
                                         nodes_per_half_period).normalized_difference
