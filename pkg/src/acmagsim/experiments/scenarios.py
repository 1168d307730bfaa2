"""Scenario runner: turns a ScenarioConfig into CSV tables and a run manifest.

Sweep points are independent. Points that need Monte Carlo trials or the
density-matrix path are mapped over a thread pool, and the results are
collected in grid order. Every Monte Carlo point draws from its own
substream keyed by (curve, point), so files do not depend on the worker count.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, TypeVar
import math

import numpy as np

from acmagsim import __version__
from acmagsim.errors import AcMagError, FitError
from acmagsim.estimation.fitting import (
    fit_coherence,
    fit_magnetometry,
    synthesize_coherence,
    synthesize_magnetometry,
)
from acmagsim.experiments.config import DEFAULT_OUT_DIR, ScenarioConfig, parse_sequence_label
from acmagsim.experiments.io import Table, write_outputs
from acmagsim.logging_config import LogTags, logger
from acmagsim.model.models import (
    AcField,
    DecouplingSequence,
    Readout,
    SensorEnsemble,
    sequence_summary,
)
from acmagsim.model.params import (
    COHERENCE_SEQUENCES,
    SEQUENCE_RATE_RATIOS,
    build_sequence,
    resonance_tau,
)
from acmagsim.montecarlo.shot_noise import (
    McConfig,
    dark_probability,
    empirical_operator_variance,
    run_experiment,
    stream_generator,
)
from acmagsim.physics.density import density_matrix_signal
from acmagsim.physics.phase import (
    approximate_resonant_slope,
    evaluate_phase,
    non_accumulation_time,
    phase_curve,
)
from acmagsim.physics.signal import (
    coherence_envelope,
    deviation_curves,
    linearized_deviation_magnitude,
    measurement_variance,
    minimum_detectable_phase,
    phase_sensitivity,
    phase_shift_limit,
    projected_phase_sensitivity,
    readout_sign,
    signal_curve,
    signal_deviation_exact,
    signal_deviation_linear,
    snr,
)

T = TypeVar("T")
R = TypeVar("R")

# Substream roots kept apart from the (curve, point) keys of sweep Monte Carlo
FIT_STREAM = 1000
VARIANCE_STREAM = 2000


@dataclass
class ScenarioRun:
    """Tables and manifest of one run, plus the files written for it."""
    config: ScenarioConfig
    tables: List[Table]
    manifest: Dict[str, Any]
    paths: List[Path] = field(default_factory=list)

    def table(self, name: str) -> Table:
        for table in self.tables:
            if table.name == name:
                return table
        raise KeyError(name)


def _map_points(config: ScenarioConfig, fn: Callable[[T], R], items: Sequence[T]) -> List[R]:
    """fn over items, threaded when configured; results keep the item order."""
    if config.threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def _optional(build: Callable[[], float]) -> Optional[float]:
    try:
        return build()
    except AcMagError:
        return None


def _mc_config(config: ScenarioConfig, *key: int) -> McConfig:
    mc = config.monte_carlo
    return McConfig(n_measurements=mc.n_measurements, seed=config.seed, n_trials=mc.n_trials,
                    projection_noise=mc.projection_noise, threads=1, stream_key=key)


def _resonant(seq: DecouplingSequence, frequency: float) -> DecouplingSequence:
    return seq.with_tau(resonance_tau(frequency, seq.pi_width))


def derived_constants(config: ScenarioConfig) -> Dict[str, Any]:
    """alpha, C, the phase-shift limit and eta_phi for the configured experiment.

    Values that do not exist for the configuration (no resonant spacing,
    zero amplitude, no coherence entry) are reported as null.
    """
    ac = config.ac_field()
    seq = config.build_sequence()
    sensor = config.build_sensor()
    resonant = _optional(lambda: resonance_tau(ac.frequency, seq.pi_width))
    limit = None
    if resonant is not None:
        limit = _optional(lambda: phase_shift_limit(ac, seq.with_tau(resonant), sensor.gamma_e))
    return {
        "alpha": seq.alpha,
        "contrast": sensor.contrast,
        "rate_ratio": sensor.rate_ratio,
        "signal_prefactor": sensor.signal_prefactor,
        "n_pulses": seq.n_pulses,
        "total_time_s": seq.total_time,
        "resonance_tau_s": resonant,
        "delta_phi_limit": limit,
        "eta_phi": _optional(lambda: phase_sensitivity(sensor, ac.amplitude, seq.n_pulses)),
    }


def _mc_columns(config: ScenarioConfig) -> List[str]:
    return ["mc_mean", "mc_std"] if config.monte_carlo.enabled else []


def _run_time_sweep(config: ScenarioConfig, extra: Dict[str, Any]) -> List[Table]:
    ac = config.ac_field()
    seq = config.build_sequence()
    sensor = config.build_sensor()
    n = seq.n_pulses
    x = np.asarray(config.sweep.n_tau)

    phi, _ = phase_curve(x, ac, seq, sensor.gamma_e)
    signal = signal_curve(x, ac, seq, sensor)
    ideal = signal_curve(x, ac, replace(seq, pi_width=0.0), sensor)
    oracle = _map_points(
        config, lambda xi: density_matrix_signal(ac, seq.with_tau(xi / n), sensor), list(x))

    columns = ["n_tau_s", "tau_s", "phi_rad", "signal", "signal_ideal_pulse", "oracle_signal"]
    columns += _mc_columns(config)
    mc_rows: List[List[float]] = [[] for _ in x]
    if config.monte_carlo.enabled:
        def trial(k: int) -> List[float]:
            outcome = run_experiment(ac, seq.with_tau(x[k] / n), sensor, _mc_config(config, 0, k))
            return [outcome.signal_mean, outcome.signal_std]
        mc_rows = _map_points(config, trial, list(range(x.size)))

    synthetic = fitted = None
    if config.fit.enabled:
        rng = stream_generator(config.seed, FIT_STREAM)
        dataset = synthesize_magnetometry(x, ac, seq, sensor, config.fit.noise_sigma, rng)
        try:
            result = fit_magnetometry(dataset, seq, sensor, ac, config.fit.uniform_weights,
                                      config.fit.multistart)
        except FitError as exc:
            extra.setdefault("fits", {})["magnetometry"] = exc.to_dict()
        else:
            extra.setdefault("fits", {})["magnetometry"] = result.to_dict()
            fitted = signal_curve(x, replace(ac, amplitude=result.values[0],
                                             initial_phase=result.values[1]), seq, sensor)
        synthetic = dataset.y
        columns += ["signal_synthetic", "signal_fit"]

    table = Table("time_sweep", columns)
    for k, xi in enumerate(x):
        row = [xi, xi / n, phi[k], signal[k], ideal[k], oracle[k]] + mc_rows[k]
        if synthetic is not None:
            row += [synthetic[k], fitted[k] if fitted is not None else float('nan')]
        table.add_row(*row)

    extra["non_accumulation_time_s"] = _optional(
        lambda: non_accumulation_time(ac, seq.family, seq.repetitions, seq.pi_width,
                                      gamma_e=sensor.gamma_e))
    return [table]


def _run_phase_deviation(config: ScenarioConfig, extra: Dict[str, Any]) -> List[Table]:
    ac = config.ac_field()
    seq = config.build_sequence()
    sensor = config.build_sensor()
    n = seq.n_pulses
    x = np.asarray(config.sweep.n_tau)
    tables = []
    for i, (name, dphi) in enumerate(zip(config.curves(), config.sweep.phase_shifts)):
        linear, exact = deviation_curves(x, ac, seq, sensor, dphi)
        mc_rows: List[List[float]] = [[] for _ in x]
        if config.monte_carlo.enabled:
            def trial(k: int, i=i, dphi=dphi) -> List[float]:
                outcome = run_experiment(ac.shifted(dphi), seq.with_tau(x[k] / n), sensor,
                                         _mc_config(config, i, k))
                spread = math.hypot(outcome.signal_std, outcome.reference_std)
                return [outcome.deviation, spread]
            mc_rows = _map_points(config, trial, list(range(x.size)))
        table = Table(name, ["n_tau_s", "delta_phi_rad", "deviation_linear", "deviation_exact"]
                      + _mc_columns(config))
        for k, xi in enumerate(x):
            table.add_row(xi, dphi, linear[k], exact[k], *mc_rows[k])
        tables.append(table)
    return tables


def _slope_curve(config: ScenarioConfig, index: int, name: str, ac: AcField,
                 seq: DecouplingSequence, sensor: SensorEnsemble) -> Table:
    grid = config.delta_phi_grid()
    mc_rows: List[List[float]] = [[] for _ in grid]
    if config.monte_carlo.enabled:
        def trial(k: int) -> List[float]:
            outcome = run_experiment(ac.shifted(grid[k]), seq, sensor,
                                     _mc_config(config, index, k))
            return [outcome.deviation, math.hypot(outcome.signal_std, outcome.reference_std)]
        mc_rows = _map_points(config, trial, list(range(len(grid))))
    table = Table(name, ["delta_phi_rad", "deviation_linear", "deviation_exact"]
                  + _mc_columns(config))
    for k, dphi in enumerate(grid):
        table.add_row(dphi, signal_deviation_linear(ac, seq, sensor, dphi),
                      signal_deviation_exact(ac, seq, sensor, dphi).prefactored, *mc_rows[k])
    return table


def _slope_summary_row(summary: Table, ac: AcField, seq: DecouplingSequence,
                       sensor: SensorEnsemble) -> None:
    result = evaluate_phase(ac, seq, sensor.gamma_e)
    approx = approximate_resonant_slope(ac, seq, sensor.gamma_e)
    summary.add_row(seq.name, seq.n_pulses, ac.amplitude, sensor.rate_ratio, result.dphi_dphase,
                    approx, 1.0 - abs(result.dphi_dphase / approx),
                    signal_deviation_linear(ac, seq, sensor, 1.0))


SLOPE_SUMMARY_COLUMNS = ["sequence", "n_pulses", "b_ac_T", "rate_ratio", "dphi_dphase",
                         "approx_slope", "slope_gap", "deviation_slope"]


def _sequence_sensor(config: ScenarioConfig, sensor: SensorEnsemble,
                     seq: DecouplingSequence) -> SensorEnsemble:
    """Sensor with the r measured alongside this sequence, when enabled and known."""
    ratio = SEQUENCE_RATE_RATIOS.get(seq.n_pulses)
    if not config.sweep.per_sequence_rates or ratio is None:
        return sensor
    return sensor.with_rates(sensor.bright_rate, ratio * sensor.bright_rate)


def _labelled_sequences(config: ScenarioConfig) -> List[DecouplingSequence]:
    pi_width = config.sequence.pi_width
    tau = resonance_tau(config.field.frequency, pi_width)
    sequences = []
    for label in config.sweep.sequences:
        family, reps = parse_sequence_label(label)
        sequences.append(build_sequence(family, reps, tau, pi_width))
    return sequences


def _run_slope_vs_n(config: ScenarioConfig, extra: Dict[str, Any]) -> List[Table]:
    ac = config.ac_field()
    sensor = config.build_sensor()
    summary = Table("slope_summary", SLOPE_SUMMARY_COLUMNS)
    tables = []
    for i, (name, seq) in enumerate(zip(config.curves(), _labelled_sequences(config))):
        seq_sensor = _sequence_sensor(config, sensor, seq)
        tables.append(_slope_curve(config, i, name, ac, seq, seq_sensor))
        _slope_summary_row(summary, ac, seq, seq_sensor)
    return tables + [summary]


def _run_slope_vs_b(config: ScenarioConfig, extra: Dict[str, Any]) -> List[Table]:
    seq = _resonant(config.build_sequence(), config.field.frequency)
    sensor = config.build_sensor()
    summary = Table("slope_summary", SLOPE_SUMMARY_COLUMNS)
    tables = []
    for i, (name, amplitude) in enumerate(zip(config.curves(), config.sweep.amplitudes)):
        ac = config.field.build(amplitude)
        tables.append(_slope_curve(config, i, name, ac, seq, sensor))
        _slope_summary_row(summary, ac, seq, sensor)
    return tables + [summary]


def _limit_curve(name: str, grid: Sequence[float], ac: AcField, seq: DecouplingSequence,
                 gamma_e: float) -> Table:
    base = math.sin(evaluate_phase(ac, seq, gamma_e).phi)
    table = Table(name, ["delta_phi_rad", "abs_deviation_exact", "abs_deviation_linear"])
    for dphi in grid:
        shifted = math.sin(evaluate_phase(ac.shifted(dphi), seq, gamma_e).phi)
        table.add_row(dphi, abs(shifted - base),
                      linearized_deviation_magnitude(ac, seq, dphi, gamma_e))
    return table


def _run_limit_curves(config: ScenarioConfig, extra: Dict[str, Any]) -> List[Table]:
    gamma_e = config.sensor.gamma_e
    grid = config.delta_phi_grid()
    names = config.curves()
    cases = [(config.ac_field(), seq) for seq in _labelled_sequences(config)]
    base_seq = _resonant(config.build_sequence(), config.field.frequency)
    cases += [(config.field.build(amplitude), base_seq) for amplitude in config.sweep.amplitudes]

    summary = Table("limit_summary", ["sequence", "n_pulses", "b_ac_T", "delta_phi_limit_rad"])
    tables = []
    for name, (ac, seq) in zip(names, cases):
        tables.append(_limit_curve(name, grid, ac, seq, gamma_e))
        summary.add_row(seq.name, seq.n_pulses, ac.amplitude,
                        phase_shift_limit(ac, seq, gamma_e))
    return tables + [summary]


def _run_coherence_decays(config: ScenarioConfig, extra: Dict[str, Any]) -> List[Table]:
    sensor = config.build_sensor()
    pi_width = config.sequence.pi_width
    quiet = AcField(amplitude=0.0, frequency=config.field.frequency)
    summary = Table("coherence_summary", [
        "sequence", "n_pulses", "t2_true_s", "p_true", "t2_fit_s", "t2_err_s", "p_fit", "p_err",
        "amplitude_fit", "reduced_chi_square"])
    fits: Dict[str, Any] = {}
    tables = []
    for k, (name, (family, reps)) in enumerate(zip(config.curves(), COHERENCE_SEQUENCES)):
        template = build_sequence(family, reps, 1.0, pi_width, Readout.IN_PHASE)
        n = template.n_pulses
        envelope = coherence_envelope(sensor, n)
        span = config.fit.decay_span * envelope.t2
        first = max(span / config.fit.decay_points, 2.0 * n * pi_width)
        x = np.linspace(first, span, config.fit.decay_points)
        seq = template.with_tau(x[0] / n)

        model = signal_curve(x, quiet, seq, sensor, envelope)
        amplitude = readout_sign(seq) * sensor.signal_prefactor
        dataset = synthesize_coherence(x, amplitude, envelope.t2, envelope.p,
                                       config.fit.noise_sigma,
                                       stream_generator(config.seed, FIT_STREAM, k))
        fitted = np.full(x.shape, np.nan)
        try:
            result = fit_coherence(dataset, uniform_weights=config.fit.uniform_weights)
        except FitError as exc:
            fits[seq.name] = exc.to_dict()
            summary.add_row(seq.name, n, envelope.t2, envelope.p, *([float('nan')] * 6))
        else:
            fits[seq.name] = result.to_dict()
            values, errors = result.parameters, result.std_errors
            fitted = result.values[0] * np.exp(-(x / values["t2"]) ** values["p"])
            summary.add_row(seq.name, n, envelope.t2, envelope.p, values["t2"], errors["t2"],
                            values["p"], errors["p"], values["amplitude"],
                            result.reduced_chi_square)

        table = Table(name, ["n_tau_s", "signal_model", "signal_synthetic", "signal_fit",
                             "sigma"])
        for i, xi in enumerate(x):
            table.add_row(xi, model[i], dataset.y[i], fitted[i], dataset.y_err[i])
        tables.append(table)
    extra["fits"] = fits
    return tables + [summary]


def _run_sensitivity(config: ScenarioConfig, extra: Dict[str, Any]) -> List[Table]:
    sensor = config.build_sensor()
    b_ac = config.field.amplitude
    total = config.prospect.total_time
    table = Table("sensitivity", ["n_pulses", "t2_s", "p", "eta_phi_rad_per_sqrt_hz",
                                  "min_phase_rad"])
    for n in sorted(sensor.coherence_table):
        entry = sensor.coherence_table[n]
        table.add_row(n, entry.t2, entry.p, phase_sensitivity(sensor, b_ac, n),
                      minimum_detectable_phase(sensor, b_ac, n, total))

    p = config.prospect
    prospect = Table("sensitivity_prospect", ["ensemble", "n_nv", "t2_s", "b_ac_T", "contrast",
                                              "total_time_s", "eta_phi_rad_per_sqrt_hz",
                                              "min_phase_rad"])
    n = config.build_sequence().n_pulses
    current = coherence_envelope(sensor, n).t2
    for label, n_nv, t2, amplitude in (("current", sensor.n_nv, current, b_ac),
                                       ("prospect", p.n_nv, p.t2, p.amplitude)):
        eta = projected_phase_sensitivity(amplitude, n_nv, t2, sensor.contrast, sensor.gamma_e)
        prospect.add_row(label, n_nv, t2, amplitude, sensor.contrast, total, eta,
                         eta / math.sqrt(total))
    return [table, prospect]


def _run_mc_validate(config: ScenarioConfig, extra: Dict[str, Any]) -> List[Table]:
    ac = config.ac_field()
    seq = config.build_sequence()
    sensor = config.build_sensor()
    mc = config.monte_carlo
    dphi = mc.delta_phi
    variance = measurement_variance(ac, seq, sensor)
    p_dark = dark_probability(ac, seq, sensor)
    table = Table("mc_validate", [
        "n_measurements", "snr_analytic", "snr_long_time", "snr_mc", "snr_mc_se",
        "deviation_analytic", "deviation_mc", "variance_analytic", "variance_mc",
        "variance_mc_se"])
    for i, n_m in enumerate(config.sweep.n_measurements):
        run = McConfig(n_measurements=n_m, seed=config.seed, n_trials=mc.n_trials,
                       projection_noise=mc.projection_noise, threads=config.threads,
                       stream_key=(i,))
        outcome = run_experiment(ac.shifted(dphi), seq, sensor, run)
        expected = snr(ac, seq, sensor, dphi, n_m)
        var_mc, var_se = empirical_operator_variance(
            p_dark, sensor, stream_generator(config.seed, VARIANCE_STREAM, i), n_m)
        table.add_row(n_m, expected.full, expected.long_time, outcome.snr, outcome.snr_std_error,
                      signal_deviation_linear(ac, seq, sensor, dphi), outcome.deviation,
                      variance, var_mc, var_se)
    return [table]


RUNNERS: Dict[str, Callable[[ScenarioConfig, Dict[str, Any]], List[Table]]] = {
    "time-sweep": _run_time_sweep,
    "phase-deviation-sweep": _run_phase_deviation,
    "slope-vs-N": _run_slope_vs_n,
    "slope-vs-B": _run_slope_vs_b,
    "limit-curves": _run_limit_curves,
    "coherence-decays": _run_coherence_decays,
    "sensitivity-report": _run_sensitivity,
    "mc-validate": _run_mc_validate,
}


def run_scenario(config: ScenarioConfig, write: bool = True) -> ScenarioRun:
    """Evaluate a scenario and, when ``write`` is set, save it under config.out_dir
    (or DEFAULT_OUT_DIR when the config names none).

    Raises:
        AcMagError: Any domain or output error from the underlying operations.
    """
    logger.log(LogTags.SCENARIO, "running %s (seed %d, %d threads)",
               config.scenario, config.seed, config.threads)
    extra: Dict[str, Any] = {}
    tables = RUNNERS[config.scenario](config, extra)

    derived = derived_constants(config)
    if "non_accumulation_time_s" in extra:
        derived["non_accumulation_time_s"] = extra.pop("non_accumulation_time_s")
    manifest: Dict[str, Any] = {
        "scenario": config.scenario,
        "seed": config.seed,
        "tool": {"name": "acmagsim", "version": __version__},
        "config": config.to_dict(),
        "derived": derived,
        "sequence": sequence_summary(config.build_sequence()),
        "files": [{"curve": t.name, "path": t.filename, "rows": len(t.rows),
                   "columns": list(t.columns)} for t in tables],
    }
    manifest.update(extra)

    run = ScenarioRun(config=config, tables=tables, manifest=manifest)
    if write:
        out_dir = config.out_dir or DEFAULT_OUT_DIR
        run.paths = write_outputs(tables, manifest, out_dir)
        logger.log(LogTags.SCENARIO, "wrote %d files to %s", len(run.paths), out_dir)
    return run
