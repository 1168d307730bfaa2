"""Core data models for the sensing experiment."""
from dataclasses import dataclass, field, replace
from enum import Enum, auto
from typing import Dict, Optional, Tuple
import math

import numpy as np

from acmagsim.constants import GAMMA_E
from acmagsim.errors import DegenerateContrastError, InvalidParameterError


class PulseAxis(Enum):
    X = auto()
    Y = auto()


class Readout(Enum):
    """Which field quadrature the final pi/2 pulse projects onto populations."""
    QUADRATURE = auto()   # final (pi/2)_Y, signal ~ sin(phi)
    IN_PHASE = auto()     # final (pi/2)_X, signal ~ cos(phi)


class SequenceFamily(Enum):
    HAHN = auto()    # single refocusing pulse
    CPMG = auto()    # Y Y ...
    XY4 = auto()     # X Y X Y
    XY8 = auto()     # X Y X Y Y X Y X

    @property
    def unit(self) -> Tuple[PulseAxis, ...]:
        return FAMILY_UNITS[self]

    @property
    def label(self) -> str:
        return self.name if self is not SequenceFamily.HAHN else "Hahn"

    @classmethod
    def parse(cls, name: str) -> 'SequenceFamily':
        """Case-insensitive lookup by name ('xy8', 'Hahn', ...)."""
        try:
            return cls[name.strip().upper()]
        except KeyError:
            valid = ", ".join(f.label for f in cls)
            raise InvalidParameterError(
                f"unknown sequence family {name!r}; expected one of {valid}") from None


X, Y = PulseAxis.X, PulseAxis.Y

FAMILY_UNITS = {
    SequenceFamily.HAHN: (X,),
    SequenceFamily.CPMG: (Y,),
    SequenceFamily.XY4: (X, Y, X, Y),
    SequenceFamily.XY8: (X, Y, X, Y, Y, X, Y, X),
}


@dataclass(frozen=True)
class AcField:
    """Sinusoidal field B cos(2 pi f t + phase) seen by the sensor.

    ``phase_shift`` is the deliberate offset added on top of ``initial_phase``
    when probing the signal response to a phase change.
    """
    amplitude: float            # tesla, >= 0
    frequency: float            # hertz, > 0
    initial_phase: float = 0.0  # radians
    phase_shift: float = 0.0    # radians

    def __post_init__(self):
        for name in ("amplitude", "frequency", "initial_phase", "phase_shift"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidParameterError(f"field {name} must be finite")
        if self.amplitude < 0:
            raise InvalidParameterError(
                f"field amplitude must be >= 0, got {self.amplitude}")
        if self.frequency <= 0:
            raise InvalidParameterError(
                f"field frequency must be > 0, got {self.frequency}")

    @property
    def phase(self) -> float:
        """Phase seen by the sensor, initial phase plus shift."""
        return self.initial_phase + self.phase_shift

    @property
    def angular_frequency(self) -> float:
        return 2 * math.pi * self.frequency

    @property
    def half_period(self) -> float:
        return 0.5 / self.frequency

    def shifted(self, dphi: float) -> 'AcField':
        """Same field with ``dphi`` added to the phase shift."""
        return replace(self, phase_shift=self.phase_shift + dphi)

    def value(self, t):
        """B(t), accepting scalars or arrays."""
        return self.amplitude * np.cos(self.angular_frequency * np.asarray(t) + self.phase)


@dataclass(frozen=True)
class Pulse:
    """A finite-width pi pulse in the timeline."""
    center: float       # seconds from the end of the initial pi/2 pulse
    width: float        # seconds
    axis: PulseAxis

    @property
    def start(self) -> float:
        return self.center - self.width / 2

    @property
    def end(self) -> float:
        return self.center + self.width / 2


@dataclass(frozen=True)
class FreeSegment:
    """Free-precession interval between pulses, with its modulation sign."""
    start: float
    end: float
    sign: int

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class DecouplingSequence:
    """A train of N pi pulses of width ``pi_width`` spaced by ``tau + pi_width``.

    The timeline starts at 0 after the initial (pi/2)_X pulse and ends at
    ``total_time = N (tau + pi_width)``. Pulse k (1-based) is centered at
    ``(k - 1/2)(tau + pi_width)`` so the free intervals are tau/2, tau, ...,
    tau, tau/2. The ideal-pulse limit is ``pi_width = 0``.
    """
    family: SequenceFamily
    repetitions: int
    tau: float                  # free precession between pulses, seconds
    pi_width: float = 0.0       # seconds
    readout: Readout = Readout.QUADRATURE

    def __post_init__(self):
        if isinstance(self.repetitions, bool) or int(self.repetitions) != self.repetitions:
            raise InvalidParameterError(
                f"repetition count must be an integer, got {self.repetitions!r}")
        if self.repetitions < 1:
            raise InvalidParameterError(
                f"repetition count must be >= 1, got {self.repetitions}")
        if self.family is SequenceFamily.HAHN and self.repetitions != 1:
            raise InvalidParameterError("Hahn echo takes exactly one repetition")
        if not (math.isfinite(self.tau) and math.isfinite(self.pi_width)):
            raise InvalidParameterError("pulse spacing and width must be finite")
        if self.pi_width < 0:
            raise InvalidParameterError(f"pi pulse width must be >= 0, got {self.pi_width}")
        if not self.tau > self.pi_width:
            raise InvalidParameterError(
                f"pulse spacing tau={self.tau} must exceed pi pulse width {self.pi_width}")

    @property
    def phase_pattern(self) -> Tuple[PulseAxis, ...]:
        return self.family.unit * self.repetitions

    @property
    def n_pulses(self) -> int:
        return len(self.family.unit) * self.repetitions

    @property
    def n_x(self) -> int:
        return sum(1 for a in self.phase_pattern if a is PulseAxis.X)

    @property
    def n_y(self) -> int:
        return sum(1 for a in self.phase_pattern if a is PulseAxis.Y)

    @property
    def alpha(self) -> float:
        """Ratio of pulse width to free spacing."""
        return self.pi_width / self.tau

    @property
    def spacing(self) -> float:
        """Center-to-center pulse distance tau (1 + alpha)."""
        return self.tau + self.pi_width

    @property
    def total_time(self) -> float:
        return self.n_pulses * self.spacing

    @property
    def free_precession_time(self) -> float:
        """N tau, the time the coherence decay is evaluated at."""
        return self.n_pulses * self.tau

    @property
    def name(self) -> str:
        if self.family is SequenceFamily.HAHN:
            return "Hahn"
        return f"{self.family.label}-{self.repetitions}"

    @property
    def pulses(self) -> Tuple[Pulse, ...]:
        s = self.spacing
        return tuple(Pulse(center=(k + 0.5) * s, width=self.pi_width, axis=axis)
                     for k, axis in enumerate(self.phase_pattern))

    @property
    def free_segments(self) -> Tuple[FreeSegment, ...]:
        """Free intervals in time order; segment k carries sign (-1)^k."""
        pulses = self.pulses
        edges = [0.0]
        for p in pulses:
            edges.extend((p.start, p.end))
        edges.append(self.total_time)
        return tuple(FreeSegment(edges[2 * k], edges[2 * k + 1], -1 if k % 2 else 1)
                     for k in range(len(pulses) + 1))

    def with_tau(self, tau: float) -> 'DecouplingSequence':
        return replace(self, tau=tau)

    def with_readout(self, readout: Readout) -> 'DecouplingSequence':
        return replace(self, readout=readout)


@dataclass(frozen=True)
class CoherenceEntry:
    """Stretched-exponential decay parameters measured for one pulse count."""
    t2: float                       # seconds
    p: float                        # stretch exponent
    t2_error: Optional[float] = None
    p_error: Optional[float] = None

    def __post_init__(self):
        if not (self.t2 > 0 and math.isfinite(self.t2)):
            raise InvalidParameterError(f"coherence time must be > 0, got {self.t2}")
        if not (self.p > 0 and math.isfinite(self.p)):
            raise InvalidParameterError(f"stretch exponent must be > 0, got {self.p}")


@dataclass(frozen=True)
class SensorEnsemble:
    """Photon rates, ensemble size and the per-N coherence table.

    Rates are per NV per readout window; the total mean count of one
    readout is ``n_nv`` times the per-NV value.
    """
    bright_rate: float      # r0, photons per NV per readout in m_s = 0
    dark_rate: float        # r1, photons per NV per readout in m_s = +-1
    n_nv: int = 1
    gamma_e: float = GAMMA_E
    coherence_table: Dict[int, CoherenceEntry] = field(default_factory=dict)

    def __post_init__(self):
        if not (math.isfinite(self.bright_rate) and math.isfinite(self.dark_rate)):
            raise InvalidParameterError("photon rates must be finite")
        if self.bright_rate < 0 or self.dark_rate < 0:
            raise InvalidParameterError("photon rates must be >= 0")
        if self.bright_rate == self.dark_rate:
            raise DegenerateContrastError(
                f"bright and dark rates are equal ({self.bright_rate}); no optical contrast")
        if self.bright_rate < self.dark_rate:
            raise InvalidParameterError(
                f"bright rate {self.bright_rate} must exceed dark rate {self.dark_rate}")
        if isinstance(self.n_nv, bool) or int(self.n_nv) != self.n_nv or self.n_nv < 1:
            raise InvalidParameterError(f"NV count must be a positive integer, got {self.n_nv}")
        if not self.gamma_e > 0:
            raise InvalidParameterError("gyromagnetic ratio must be > 0")
        for n in self.coherence_table:
            if int(n) != n or n < 1:
                raise InvalidParameterError(f"coherence table key must be a pulse count, got {n!r}")

    @property
    def rate_ratio(self) -> float:
        """r = r1 / r0."""
        return self.dark_rate / self.bright_rate

    @property
    def signal_prefactor(self) -> float:
        """(1 - r) / (1 + r), the normalized differential signal at full polarization."""
        r = self.rate_ratio
        return (1 - r) / (1 + r)

    @property
    def contrast(self) -> float:
        """Shot-noise contrast C = [1 + 2 (r0 + r1) / (r0 - r1)^2]^(-1/2)."""
        diff = self.bright_rate - self.dark_rate
        return (1 + 2 * (self.bright_rate + self.dark_rate) / diff ** 2) ** -0.5

    @property
    def mean_rate(self) -> float:
        """(r0 + r1) / 2, per NV."""
        return 0.5 * (self.bright_rate + self.dark_rate)

    def with_coherence(self, table: Dict[int, CoherenceEntry]) -> 'SensorEnsemble':
        return replace(self, coherence_table=dict(table))

    def with_rates(self, bright_rate: float, dark_rate: float) -> 'SensorEnsemble':
        return replace(self, bright_rate=bright_rate, dark_rate=dark_rate)


@dataclass(frozen=True)
class SignalPoint:
    """Every derived quantity for one (field, sequence, sensor, dphi) point."""
    free_precession_time: float
    phase: float
    phase_derivative: float
    at_resonance: bool
    signal: float
    deviation_linear: float
    deviation_exact: float
    variance: float
    snr: float
    snr_long_time: float


@dataclass
class FitResult:
    """Outcome of a weighted least-squares fit."""
    parameter_names: Tuple[str, ...]
    values: np.ndarray
    covariance: np.ndarray
    residual_norm: float
    chi_square: float
    dof: int
    iterations: int
    converged: bool
    reason: str = ""
    starts_tried: int = 1

    @property
    def parameters(self) -> Dict[str, float]:
        return {n: float(v) for n, v in zip(self.parameter_names, self.values)}

    @property
    def std_errors(self) -> Dict[str, float]:
        diag = np.diag(self.covariance)
        return {n: float(math.sqrt(d)) if d >= 0 else float('nan')
                for n, d in zip(self.parameter_names, diag)}

    @property
    def reduced_chi_square(self) -> float:
        return self.chi_square / self.dof if self.dof > 0 else float('nan')

    def to_dict(self) -> Dict[str, object]:
        return {
            "parameters": self.parameters,
            "std_errors": self.std_errors,
            "covariance": [[float(c) for c in row] for row in self.covariance],
            "residual_norm": float(self.residual_norm),
            "chi_square": float(self.chi_square),
            "dof": int(self.dof),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "reason": self.reason,
        }


def sequence_summary(seq: DecouplingSequence) -> Dict[str, object]:
    """Flat description of a sequence for manifests and JSON responses."""
    return {
        "name": seq.name,
        "family": seq.family.label,
        "repetitions": seq.repetitions,
        "n_pulses": seq.n_pulses,
        "tau_s": seq.tau,
        "pi_width_s": seq.pi_width,
        "alpha": seq.alpha,
        "readout": seq.readout.name.lower(),
        "pattern": "".join(a.name for a in seq.phase_pattern),
    }
