"""Photon shot-noise Monte Carlo for the paired pi/2 / 3pi/2 readout.

Each readout projects the N_nv spins (dark with probability p_dark) and then
counts photons: the number of dark spins K is Binomial(N_nv, p_dark) and
the count is Poisson with mean r0 (N_nv - K) + r1 K. Aggregating n readouts
of a branch is the same draw with N_nv replaced by n N_nv.

Trials are generated in fixed blocks of MC_BLOCK_SIZE, each with its own
Philox stream keyed by (seed, stream_key..., stream, block), so the numbers
are the same whatever the worker count.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Sequence, Tuple
import math

import numpy as np

from acmagsim.constants import MC_BLOCK_SIZE, MC_MAX_PHOTON_DRAWS
from acmagsim.errors import InvalidParameterError, ZeroVarianceError
from acmagsim.logging_config import LogTags, logger
from acmagsim.model.models import AcField, DecouplingSequence, SensorEnsemble
from acmagsim.physics.signal import spin_polarization

SHIFTED_STREAM = 0
REFERENCE_STREAM = 1


@dataclass(frozen=True)
class McConfig:
    """Monte Carlo settings.

    ``n_measurements`` counts single readouts; they are split evenly between
    the two final-pulse branches.
    """
    n_measurements: int
    seed: int
    n_trials: int = 200
    projection_noise: bool = True
    threads: int = 1
    stream_key: Tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self):
        for name in ("n_measurements", "n_trials", "threads", "seed"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise InvalidParameterError(f"{name} must be an integer, got {value!r}")
        if self.n_measurements < 1:
            raise InvalidParameterError(f"n_measurements must be >= 1, got {self.n_measurements}")
        if self.n_trials < 1:
            raise InvalidParameterError(f"n_trials must be >= 1, got {self.n_trials}")
        if self.threads < 1:
            raise InvalidParameterError(f"threads must be >= 1, got {self.threads}")
        if not 0 <= self.seed < 2 ** 64:
            raise InvalidParameterError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    @property
    def readouts_per_branch(self) -> int:
        return math.ceil(self.n_measurements / 2)

    def keyed(self, *key: int) -> 'McConfig':
        """Copy whose streams are further keyed by ``key``, for per-point substreams."""
        return replace(self, stream_key=tuple(self.stream_key) + tuple(key))


@dataclass(frozen=True, eq=False)
class McOutcome:
    """Per-trial normalized signals and raw branch counts.

    The ``reference`` arrays come from the same field without its phase shift.
    """
    signals: np.ndarray
    reference_signals: np.ndarray
    counts_a: np.ndarray
    counts_b: np.ndarray
    reference_counts_a: np.ndarray
    reference_counts_b: np.ndarray
    p_dark: float
    reference_p_dark: float

    @property
    def n_trials(self) -> int:
        return int(self.signals.size)

    @property
    def signal_mean(self) -> float:
        return float(np.mean(self.signals))

    @property
    def signal_std(self) -> float:
        return float(np.std(self.signals, ddof=1)) if self.signals.size > 1 else 0.0

    @property
    def reference_mean(self) -> float:
        return float(np.mean(self.reference_signals))

    @property
    def reference_std(self) -> float:
        return (float(np.std(self.reference_signals, ddof=1))
                if self.reference_signals.size > 1 else 0.0)

    @property
    def deviation(self) -> float:
        """Empirical signal change caused by the phase shift."""
        return self.signal_mean - self.reference_mean

    @property
    def deviation_std_error(self) -> float:
        n = self.n_trials
        return math.sqrt(self.signal_std ** 2 / n + self.reference_std ** 2 / n)

    @property
    def snr(self) -> float:
        return estimate_empirical_snr(self.signals, self.reference_signals)

    @property
    def snr_std_error(self) -> float:
        """Delta-method standard error of ``snr``."""
        n = self.n_trials
        if n < 2:
            return float('nan')
        value = self.snr
        ratio = self.signal_std / self.reference_std
        return math.sqrt((ratio ** 2 + 1.0) / n + value ** 2 / (2.0 * (n - 1)))

    def summary(self) -> dict:
        return {
            "n_trials": self.n_trials,
            "signal_mean": self.signal_mean,
            "signal_std": self.signal_std,
            "reference_mean": self.reference_mean,
            "reference_std": self.reference_std,
            "deviation": self.deviation,
            "counts_a_total": int(self.counts_a.sum()),
            "counts_b_total": int(self.counts_b.sum()),
        }


def stream_generator(seed: int, *key: int) -> np.random.Generator:
    """Counter-based Philox generator for one (seed, key) substream."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


def _branch_counts(p_dark, sensor: SensorEnsemble, n_readouts: int,
                   rng: np.random.Generator, size, projection_noise: bool) -> np.ndarray:
    """Photon counts summed over ``n_readouts`` readouts of all N_nv spins."""
    spins = n_readouts * sensor.n_nv
    if projection_noise:
        dark = rng.binomial(spins, p_dark, size=size)
        mean = sensor.bright_rate * (spins - dark) + sensor.dark_rate * dark
    else:
        mean = np.full(size, spins * ((1.0 - p_dark) * sensor.bright_rate
                                      + p_dark * sensor.dark_rate))
    return rng.poisson(mean).astype(np.int64)


def simulate_readout_pair(p_dark: float, sensor: SensorEnsemble, rng: np.random.Generator,
                          n_readouts: int = 1, size: int = 1,
                          projection_noise: bool = True) -> Tuple[np.ndarray, np.ndarray]:
    """Draw the pi/2 branch (dark probability p_dark) and the 3pi/2 branch (1 - p_dark).

    Args:
        p_dark: Probability that a spin reads out dark after the pi/2 pulse.
        sensor: Photon rates and ensemble size.
        rng: Source of randomness.
        n_readouts: Readouts summed into each returned count.
        size: Number of independent count pairs.
        projection_noise: Draw the dark-spin number binomially before the
            photon count; otherwise use the averaged Poisson mean.

    Returns:
        Tuple of (counts_a, counts_b) integer arrays of length ``size``.
    """
    if not 0.0 <= p_dark <= 1.0:
        raise InvalidParameterError(f"p_dark must lie in [0, 1], got {p_dark}")
    if n_readouts * sensor.n_nv >= MC_MAX_PHOTON_DRAWS:
        raise InvalidParameterError("readout count times N_nv overflows the photon counter")
    counts_a = _branch_counts(p_dark, sensor, n_readouts, rng, size, projection_noise)
    counts_b = _branch_counts(1.0 - p_dark, sensor, n_readouts, rng, size, projection_noise)
    return counts_a, counts_b


def dark_probability(field: AcField, seq: DecouplingSequence, sensor: SensorEnsemble) -> float:
    """(1 - <sigma_z>) / 2 after the pi/2 final pulse."""
    z = spin_polarization(field, seq, sensor)
    return min(1.0, max(0.0, 0.5 * (1.0 - z)))


def _block_sizes(n_trials: int) -> List[int]:
    full, rest = divmod(n_trials, MC_BLOCK_SIZE)
    return [MC_BLOCK_SIZE] * full + ([rest] if rest else [])


def _normalized(counts_a: np.ndarray, counts_b: np.ndarray) -> np.ndarray:
    total = counts_a + counts_b
    diff = (counts_a - counts_b).astype(float)
    return np.divide(diff, total, out=np.zeros_like(diff), where=total > 0)


def _run_stream(p_dark: float, sensor: SensorEnsemble, mc: McConfig,
                stream: int) -> Tuple[np.ndarray, np.ndarray]:
    sizes = _block_sizes(mc.n_trials)

    def draw(block: int) -> Tuple[np.ndarray, np.ndarray]:
        rng = stream_generator(mc.seed, *mc.stream_key, stream, block)
        return simulate_readout_pair(p_dark, sensor, rng, mc.readouts_per_branch,
                                     sizes[block], mc.projection_noise)

    logger.debug(LogTags.MONTE_CARLO, "stream %d: %d trials in %d blocks on %d threads",
                 stream, mc.n_trials, len(sizes), mc.threads)
    if mc.threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=mc.threads) as pool:
            parts = list(pool.map(draw, range(len(sizes))))
    else:
        parts = [draw(b) for b in range(len(sizes))]
    counts_a = np.concatenate([p[0] for p in parts])
    counts_b = np.concatenate([p[1] for p in parts])
    return counts_a, counts_b


def run_experiment(field: AcField, seq: DecouplingSequence, sensor: SensorEnsemble,
                   mc: McConfig) -> McOutcome:
    """Simulate ``mc.n_trials`` repetitions with and without the field's phase shift."""
    if mc.readouts_per_branch * sensor.n_nv >= MC_MAX_PHOTON_DRAWS:
        raise InvalidParameterError(
            f"N_m={mc.n_measurements} with N_nv={sensor.n_nv} overflows the photon counter")
    reference_field = replace(field, phase_shift=0.0)
    p_shift = dark_probability(field, seq, sensor)
    p_ref = dark_probability(reference_field, seq, sensor)
    counts_a, counts_b = _run_stream(p_shift, sensor, mc, SHIFTED_STREAM)
    ref_a, ref_b = _run_stream(p_ref, sensor, mc, REFERENCE_STREAM)
    return McOutcome(
        signals=_normalized(counts_a, counts_b),
        reference_signals=_normalized(ref_a, ref_b),
        counts_a=counts_a,
        counts_b=counts_b,
        reference_counts_a=ref_a,
        reference_counts_b=ref_b,
        p_dark=p_shift,
        reference_p_dark=p_ref,
    )


def estimate_empirical_snr(with_shift: Sequence[float], without_shift: Sequence[float]) -> float:
    """|mean(with) - mean(without)| / std(without).

    Raises:
        InvalidParameterError: If either set is empty.
        ZeroVarianceError: If the reference set has no spread.
    """
    shifted = np.asarray(with_shift, dtype=float)
    reference = np.asarray(without_shift, dtype=float)
    if shifted.size == 0 or reference.size == 0:
        raise InvalidParameterError("empirical SNR needs nonempty outcome sets")
    spread = float(np.std(reference, ddof=1)) if reference.size > 1 else 0.0
    if spread == 0.0:
        raise ZeroVarianceError("reference outcomes have zero variance")
    return abs(float(np.mean(shifted)) - float(np.mean(reference))) / spread


def empirical_operator_variance(p_dark: float, sensor: SensorEnsemble,
                                rng: np.random.Generator, n_readouts: int) -> Tuple[float, float]:
    """Per-NV variance of single pi/2-branch readouts and its standard error.

    Returns:
        Tuple of (variance, standard_error) in photons^2 per NV.
    """
    counts, _ = simulate_readout_pair(p_dark, sensor, rng, 1, n_readouts)
    counts = counts.astype(float)
    var = float(np.var(counts, ddof=1))
    centered = counts - counts.mean()
    m4 = float(np.mean(centered ** 4))
    se = math.sqrt(max(m4 - var ** 2, 0.0) / n_readouts)
    return var / sensor.n_nv, se / sensor.n_nv
