"""Weighted least-squares fits for magnetometry sweeps and coherence decays."""

from collections.abc import Mapping
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple
import math

import numpy as np

from acmagsim.errors import (
    ConvergenceError,
    FitError,
    InvalidParameterError,
    SingularJacobianError,
)
from acmagsim.estimation.levenberg import (
    LevenbergMarquardt,
    Model,
    covariance_from_jacobian,
    numerical_jacobian,
)
from acmagsim.logging_config import LogTags, logger
from acmagsim.model.models import (
    AcField,
    DecouplingSequence,
    FitResult,
    Readout,
    SensorEnsemble,
)
from acmagsim.physics.phase import phase_kernel
from acmagsim.physics.signal import coherence_envelope, readout_sign, signal_curve

MAGNETOMETRY_PARAMETERS = ("amplitude", "initial_phase")
COHERENCE_PARAMETERS = ("amplitude", "t2", "p")
PHASE_GRID_POINTS = 8


@dataclass(frozen=True, eq=False)
class Dataset:
    """Sweep values x, signals y and per-point standard deviations y_err."""
    x: np.ndarray
    y: np.ndarray
    y_err: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        y_err = np.broadcast_to(np.asarray(self.y_err, dtype=float), y.shape).copy()
        if x.ndim != 1 or x.shape != y.shape:
            raise InvalidParameterError(
                f"x and y must be 1-D arrays of equal length, got {x.shape} and {y.shape}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise InvalidParameterError("dataset contains non-finite values")
        if not np.all(y_err > 0):
            raise InvalidParameterError("every y_err must be > 0")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "y_err", y_err)

    def __len__(self) -> int:
        return int(self.x.size)


def fit_curve(model: Model, dataset: Dataset, start: Sequence[float],
              names: Sequence[str], uniform_weights: bool = False,
              max_iterations: Optional[int] = None) -> FitResult:
    """Levenberg-Marquardt fit of ``model(params, x)`` to a dataset.

    With per-point weights the covariance is (J^T W J)^-1 with absolute
    sigmas; with ``uniform_weights`` it is scaled by the reduced chi-square.

    Raises:
        InvalidParameterError: If there are not more points than parameters.
        ConvergenceError: If the iteration limit is reached; carries the last iterate.
        SingularJacobianError: If the covariance cannot be formed.
    """
    start = np.asarray(start, dtype=float)
    n_params = start.size
    if len(dataset) < n_params + 1:
        raise InvalidParameterError(
            f"{len(dataset)} points cannot constrain {n_params} parameters")
    sigma = np.ones_like(dataset.y) if uniform_weights else dataset.y_err
    kwargs = {} if max_iterations is None else {"max_iterations": max_iterations}
    solver = LevenbergMarquardt(model, dataset.x, dataset.y, sigma, **kwargs)
    scale = np.where(np.abs(start) > 0, np.abs(start), 1.0)
    state = solver.minimize(start, scale)

    residual = np.asarray(model(state.params, dataset.x)) - dataset.y
    chi_square = float(np.sum((residual / dataset.y_err) ** 2))
    dof = len(dataset) - n_params

    def result(covariance: np.ndarray) -> FitResult:
        return FitResult(parameter_names=tuple(names), values=state.params.copy(),
                         covariance=covariance,
                         residual_norm=float(np.sqrt(2.0 * state.cost)),
                         chi_square=chi_square, dof=dof, iterations=state.iterations,
                         converged=state.converged, reason=state.reason)

    if not state.converged:
        raise ConvergenceError(
            f"no convergence after {state.iterations} iterations ({state.reason})",
            result(np.full((n_params, n_params), np.nan)))
    covariance = covariance_from_jacobian(state.jacobian, scale)
    if uniform_weights and dof > 0:
        covariance = covariance * (2.0 * state.cost / dof)
    logger.log(LogTags.ESTIMATION, "fit converged (%s) in %d iterations, chi2/dof=%.4g",
               state.reason, state.iterations, chi_square / dof if dof else float('nan'))
    return result(covariance)


def magnetometry_model(seq: DecouplingSequence, sensor: SensorEnsemble,
                       frequency: float) -> Model:
    """S(N tau; B, phase) at fixed N, pulse width, readout and coherence."""
    envelope = coherence_envelope(sensor, seq.n_pulses)
    prefactor = readout_sign(seq) * sensor.signal_prefactor
    n = seq.n_pulses
    quadrature = seq.readout is Readout.QUADRATURE

    def model(params: np.ndarray, x: np.ndarray) -> np.ndarray:
        amplitude, phase = params
        phi, _, _ = phase_kernel(sensor.gamma_e * amplitude, frequency, phase, n,
                                 x / n, seq.pi_width)
        trig = np.sin(phi) if quadrature else np.cos(phi)
        return prefactor * envelope.envelope(x) * trig

    return model


def coherence_model(params: np.ndarray, x: np.ndarray) -> np.ndarray:
    """A exp[-(x / T2)^p]."""
    amplitude, t2, p = params
    return amplitude * np.exp(-(x / t2) ** p)


def guess_magnetometry_start(dataset: Dataset, seq: DecouplingSequence,
                             sensor: SensorEnsemble, frequency: float) -> Tuple[float, float]:
    """B from the peak-to-peak swing, phase from a coarse grid over the sign pattern."""
    envelope = coherence_envelope(sensor, seq.n_pulses)
    half_swing = 0.5 * float(np.max(dataset.y) - np.min(dataset.y))
    decay = float(envelope.envelope(np.median(dataset.x)))
    ratio = min(1.0, half_swing / (sensor.signal_prefactor * decay))
    peak_phase = math.asin(ratio)
    resonant_time = seq.n_pulses / (2.0 * frequency)
    amplitude = peak_phase * math.pi / (2.0 * sensor.gamma_e * resonant_time)
    if amplitude <= 0:
        amplitude = 1e-3 * math.pi / (2.0 * sensor.gamma_e * resonant_time)

    model = magnetometry_model(seq, sensor, frequency)
    grid = 2.0 * math.pi * np.arange(PHASE_GRID_POINTS) / PHASE_GRID_POINTS
    costs = [np.sum(((model(np.array([amplitude, g]), dataset.x) - dataset.y)
                     / dataset.y_err) ** 2) for g in grid]
    return amplitude, float(grid[int(np.argmin(costs))])


def _canonical_magnetometry(result: FitResult) -> FitResult:
    """Map (B < 0, phase) to (-B, phase + pi) and wrap the phase into [0, 2 pi)."""
    values = result.values.copy()
    covariance = result.covariance
    if values[0] < 0:
        values[0] = -values[0]
        values[1] += math.pi
        flip = np.diag([-1.0, 1.0])
        covariance = flip @ covariance @ flip
    values[1] = math.fmod(values[1], 2.0 * math.pi)
    if values[1] < 0:
        values[1] += 2.0 * math.pi
    result.values = values
    result.covariance = covariance
    return result


def fit_magnetometry(dataset: Dataset, seq: DecouplingSequence, sensor: SensorEnsemble,
                     init: AcField, uniform_weights: bool = False,
                     multistart: int = 0) -> FitResult:
    """Recover (B_ac, phase) from a signal-versus-N tau sweep.

    The x values are N tau; tau = x / N with the sequence's pulse width. T2,
    p and r come from the sensor. ``init`` supplies the field frequency and
    the first starting point; the default guess is always tried as well,
    plus ``multistart`` extra starts spread over the phase circle. The
    lowest chi-square converged fit wins.

    Raises:
        ConvergenceError: If no start converges.
    """
    if np.any(dataset.x / seq.n_pulses <= seq.pi_width):
        raise InvalidParameterError("every N tau must exceed N times the pi pulse width")
    model = magnetometry_model(seq, sensor, init.frequency)
    guess = guess_magnetometry_start(dataset, seq, sensor, init.frequency)
    starts: List[Tuple[float, float]] = [(init.amplitude, init.phase), guess]
    for k in range(1, multistart + 1):
        starts.append((guess[0], guess[1] + 2.0 * math.pi * k / (multistart + 1)))

    best: Optional[FitResult] = None
    last_error: Optional[FitError] = None
    for amplitude, phase in starts:
        if amplitude == 0:
            amplitude = guess[0]
        try:
            result = fit_curve(model, dataset, [amplitude, phase], MAGNETOMETRY_PARAMETERS,
                               uniform_weights)
        except (ConvergenceError, SingularJacobianError) as exc:
            logger.debug(LogTags.ESTIMATION, "start (%.4g T, %.4g rad) failed: %s",
                         amplitude, phase, exc)
            last_error = exc
            continue
        if best is None or result.chi_square < best.chi_square:
            best = result
    if best is None:
        assert last_error is not None
        raise last_error
    best.starts_tried = len(starts)
    return _canonical_magnetometry(best)


def guess_coherence_start(dataset: Dataset) -> Tuple[float, float, float]:
    """Amplitude from the earliest point, T2 from the 1/e crossing, p = 1."""
    order = np.argsort(dataset.x)
    x = dataset.x[order]
    y = dataset.y[order]
    amplitude = float(y[0]) if y[0] != 0 else float(y[np.argmax(np.abs(y))])
    if amplitude == 0:
        amplitude = 1.0
    level = abs(amplitude) / math.e
    below = np.nonzero(np.abs(y) < level)[0]
    if below.size and below[0] > 0:
        i = below[0]
        y0, y1 = abs(y[i - 1]), abs(y[i])
        t2 = float(x[i - 1] + (y0 - level) * (x[i] - x[i - 1]) / (y0 - y1))
    else:
        t2 = float(x[-1])
    if t2 <= 0:
        t2 = float(np.max(x)) or 1.0
    return amplitude, t2, 1.0


def fit_coherence(dataset: Dataset, init: Optional[Mapping[str, float]] = None,
                  uniform_weights: bool = False) -> FitResult:
    """Fit A exp[-(N tau / T2)^p] with free amplitude, T2 and p.

    Args:
        dataset: x is N tau in seconds, y the in-phase signal.
        init: Optional starting values keyed by 'amplitude', 't2', 'p';
            missing keys come from the default guess.
    """
    guess = dict(zip(COHERENCE_PARAMETERS, guess_coherence_start(dataset)))
    if init:
        unknown = set(init) - set(COHERENCE_PARAMETERS)
        if unknown:
            raise InvalidParameterError(f"unknown coherence parameters {sorted(unknown)}")
        guess.update({k: float(v) for k, v in init.items()})
    start = [guess[name] for name in COHERENCE_PARAMETERS]
    return fit_curve(coherence_model, dataset, start, COHERENCE_PARAMETERS, uniform_weights)


def synthesize_magnetometry(free_times, field: AcField, seq: DecouplingSequence,
                            sensor: SensorEnsemble, sigma: float,
                            rng: np.random.Generator) -> Dataset:
    """Signal-versus-N tau sweep with Gaussian noise of standard deviation sigma."""
    x = np.asarray(free_times, dtype=float)
    y = signal_curve(x, field, seq, sensor)
    if sigma > 0:
        y = y + rng.normal(0.0, sigma, size=x.shape)
    return Dataset(x, y, np.full(x.shape, sigma if sigma > 0 else 1.0))


def synthesize_coherence(free_times, amplitude: float, t2: float, p: float, sigma: float,
                         rng: np.random.Generator) -> Dataset:
    """Stretched-exponential decay with Gaussian noise of standard deviation sigma."""
    x = np.asarray(free_times, dtype=float)
    y = coherence_model(np.array([amplitude, t2, p]), x)
    if sigma > 0:
        y = y + rng.normal(0.0, sigma, size=x.shape)
    return Dataset(x, y, np.full(x.shape, sigma if sigma > 0 else 1.0))


def noise_for_parameter_error(model: Model, params: Sequence[float], x,
                              index: int, target: float) -> float:
    """Per-point sigma for which the fitted parameter ``index`` has std error ``target``."""
    params = np.asarray(params, dtype=float)
    jac = numerical_jacobian(model, params, np.asarray(x, dtype=float))
    scale = np.where(np.abs(params) > 0, np.abs(params), 1.0)
    unit = covariance_from_jacobian(jac, scale)
    return target / math.sqrt(unit[index, index])
