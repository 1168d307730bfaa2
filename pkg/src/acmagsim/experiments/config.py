"""Scenario configuration: TOML text in, validated ScenarioConfig out.

Every key is optional. An empty file resolves to the XY8-1 reference
experiment (200 kHz, 0.74 uT, phase pi/2, 124 ns pi pulses, 60 NVs) running
the time-sweep scenario.
"""

from collections.abc import Mapping
from dataclasses import asdict, dataclass
import dataclasses
from typing import Any, Dict, List, Optional, Tuple
import math
import sys

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from acmagsim.constants import DEFAULT_BRIGHT_RATE, DEFAULT_DARK_RATE, DEFAULT_NV_COUNT, GAMMA_E
from acmagsim.errors import ConfigError
from acmagsim.logging_config import LogTags, logger
from acmagsim.model.models import (
    AcField,
    CoherenceEntry,
    DecouplingSequence,
    Readout,
    SensorEnsemble,
    SequenceFamily,
)
from acmagsim.model.params import (
    COHERENCE_SEQUENCES,
    DEFAULT_COHERENCE_TABLE,
    build_sequence,
    resonance_tau,
)
from acmagsim.model.validator import ParameterValidator, Violation

SCENARIOS: Dict[str, str] = {
    "time-sweep": "Signal versus N tau for one sequence, with density-matrix check",
    "phase-deviation-sweep": "Signal deviation versus N tau for several phase shifts",
    "slope-vs-N": "Deviation versus phase shift for several pulse counts at resonance",
    "slope-vs-B": "Deviation versus phase shift for several field amplitudes at resonance",
    "limit-curves": "Exact and linearized |dS| versus phase shift, with the phase-shift limit",
    "coherence-decays": "Synthetic in-phase decays fitted for T2 and p",
    "sensitivity-report": "Phase sensitivity per tabulated N, plus ensemble prospects",
    "mc-validate": "Shot-noise Monte Carlo against the analytic variance and SNR",
}

DEFAULT_SCENARIO = "time-sweep"
DEFAULT_OUT_DIR = "out"
DEFAULT_N_TAU = (4e-6, 40e-6, 181)
DEFAULT_PHASE_SHIFTS = (0.05 * math.pi, 0.01 * math.pi, -0.02 * math.pi, -0.05 * math.pi)
DEFAULT_DELTA_PHI = (-0.05 * math.pi, 0.05 * math.pi, 41)
DEFAULT_LIMIT_DELTA_PHI = (0.0, 1.0, 201)
DEFAULT_SLOPE_SEQUENCES = ("cpmg-2", "xy4-1", "xy8-1")
DEFAULT_AMPLITUDES = (0.37e-6, 0.74e-6, 1.48e-6)
DEFAULT_MC_MEASUREMENTS = (10_000, 40_000)

TOP_LEVEL_KEYS = ("scenario", "seed", "threads", "out_dir", "field", "sequence", "sensor",
                  "sweep", "monte_carlo", "fit", "prospect")


def _grid(start: float, stop: float, points: int) -> List[float]:
    return [float(v) for v in np.linspace(start, stop, points)]


@dataclass
class FieldConfig:
    amplitude: float = 0.74e-6
    frequency: float = 200e3
    initial_phase: float = math.pi / 2
    phase_shift: float = 0.0

    def build(self, amplitude: Optional[float] = None) -> AcField:
        return AcField(amplitude=self.amplitude if amplitude is None else amplitude,
                       frequency=self.frequency, initial_phase=self.initial_phase,
                       phase_shift=self.phase_shift)


@dataclass
class SequenceConfig:
    family: SequenceFamily = SequenceFamily.XY8
    repetitions: int = 1
    tau: Optional[float] = None     # None selects the resonant spacing
    pi_width: float = 124e-9
    readout: Readout = Readout.QUADRATURE

    def build(self, frequency: float) -> DecouplingSequence:
        tau = resonance_tau(frequency, self.pi_width) if self.tau is None else self.tau
        return build_sequence(self.family, self.repetitions, tau, self.pi_width, self.readout)


@dataclass
class SensorConfig:
    n_nv: int = DEFAULT_NV_COUNT
    bright_rate: float = DEFAULT_BRIGHT_RATE
    dark_rate: float = DEFAULT_DARK_RATE
    gamma_e: float = GAMMA_E
    coherence: Dict[int, CoherenceEntry] = dataclasses.field(
        default_factory=lambda: dict(DEFAULT_COHERENCE_TABLE))

    def build(self) -> SensorEnsemble:
        return SensorEnsemble(bright_rate=self.bright_rate, dark_rate=self.dark_rate,
                              n_nv=self.n_nv, gamma_e=self.gamma_e,
                              coherence_table=dict(self.coherence))


@dataclass
class SweepConfig:
    n_tau: List[float] = dataclasses.field(default_factory=lambda: _grid(*DEFAULT_N_TAU))
    phase_shifts: List[float] = dataclasses.field(
        default_factory=lambda: list(DEFAULT_PHASE_SHIFTS))
    delta_phi: Optional[List[float]] = None     # None picks the scenario's default grid
    sequences: List[str] = dataclasses.field(
        default_factory=lambda: list(DEFAULT_SLOPE_SEQUENCES))
    amplitudes: List[float] = dataclasses.field(default_factory=lambda: list(DEFAULT_AMPLITUDES))
    n_measurements: List[int] = dataclasses.field(
        default_factory=lambda: list(DEFAULT_MC_MEASUREMENTS))
    per_sequence_rates: bool = True


@dataclass
class MonteCarloConfig:
    enabled: bool = False
    n_measurements: int = 100_000
    n_trials: int = 200
    projection_noise: bool = True
    delta_phi: float = 0.01 * math.pi


@dataclass
class FitConfig:
    enabled: bool = False
    noise_sigma: float = 1e-3
    uniform_weights: bool = False
    multistart: int = 0
    decay_points: int = 60
    decay_span: float = 3.0     # last decay point at decay_span * T2


@dataclass
class ProspectConfig:
    n_nv: float = 1e11
    t2: float = 100e-6
    amplitude: float = 1e-6
    total_time: float = 1.0


@dataclass
class ScenarioConfig:
    """Fully resolved scenario: ids, seeds and every parameter block."""
    scenario: str = DEFAULT_SCENARIO
    seed: int = 0
    threads: int = 1
    out_dir: Optional[str] = None    # None writes to DEFAULT_OUT_DIR
    field: FieldConfig = dataclasses.field(default_factory=FieldConfig)
    sequence: SequenceConfig = dataclasses.field(default_factory=SequenceConfig)
    sensor: SensorConfig = dataclasses.field(default_factory=SensorConfig)
    sweep: SweepConfig = dataclasses.field(default_factory=SweepConfig)
    monte_carlo: MonteCarloConfig = dataclasses.field(default_factory=MonteCarloConfig)
    fit: FitConfig = dataclasses.field(default_factory=FitConfig)
    prospect: ProspectConfig = dataclasses.field(default_factory=ProspectConfig)

    def ac_field(self) -> AcField:
        return self.field.build()

    def build_sequence(self) -> DecouplingSequence:
        return self.sequence.build(self.field.frequency)

    def build_sensor(self) -> SensorEnsemble:
        return self.sensor.build()

    def delta_phi_grid(self) -> List[float]:
        if self.sweep.delta_phi is not None:
            return list(self.sweep.delta_phi)
        if self.scenario == "limit-curves":
            return _grid(*DEFAULT_LIMIT_DELTA_PHI)
        return _grid(*DEFAULT_DELTA_PHI)

    def curves(self) -> List[str]:
        """Names of the per-curve tables this scenario writes, in output order."""
        if self.scenario == "time-sweep":
            return ["time_sweep"]
        if self.scenario == "phase-deviation-sweep":
            return [f"phase_deviation_{i}" for i in range(len(self.sweep.phase_shifts))]
        if self.scenario == "slope-vs-N":
            return [f"slope_{label.lower()}" for label in self.sweep.sequences]
        if self.scenario == "slope-vs-B":
            return [f"slope_b{i}" for i in range(len(self.sweep.amplitudes))]
        if self.scenario == "limit-curves":
            return ([f"limit_{label.lower()}" for label in self.sweep.sequences]
                    + [f"limit_b{i}" for i in range(len(self.sweep.amplitudes))])
        if self.scenario == "coherence-decays":
            return [f"decay_{label.lower()}" for label in coherence_sequence_labels()]
        if self.scenario == "sensitivity-report":
            return ["sensitivity", "sensitivity_prospect"]
        return ["mc_validate"]

    def to_dict(self) -> Dict[str, Any]:
        """Plain, JSON-ready form with enum labels and string coherence keys."""
        data = asdict(self)
        data["sequence"]["family"] = self.sequence.family.label
        data["sequence"]["readout"] = self.sequence.readout.name.lower()
        data["sensor"]["coherence"] = {
            str(n): asdict(entry) for n, entry in sorted(self.sensor.coherence.items())}
        return data


def coherence_sequence_labels() -> List[str]:
    """Labels of the sequences whose in-phase decays tabulate T2(N)."""
    return [DecouplingSequence(family, reps, 1.0).name for family, reps in COHERENCE_SEQUENCES]


def parse_sequence_label(label: str) -> Tuple[SequenceFamily, int]:
    """'xy8-1' -> (XY8, 1), 'CPMG-32' -> (CPMG, 32), 'hahn' -> (HAHN, 1)."""
    name, _, reps = label.strip().partition("-")
    family = SequenceFamily.parse(name)
    return family, int(reps) if reps else 1


def _section(v: ParameterValidator, raw: Mapping, name: str,
             allowed: Tuple[str, ...]) -> Dict[str, Any]:
    table = raw.get(name, {})
    if not isinstance(table, Mapping):
        v.error(name, "must be a table")
        return {}
    v.check_keys(name, dict(table), allowed)
    return dict(table)


def _number(v: ParameterValidator, table: Dict[str, Any], section: str, key: str,
            default: float, **bounds) -> float:
    if key not in table:
        return default
    value = v.check_number(f"{section}.{key}", table[key], **bounds)
    return default if value is None else value


def _integer(v: ParameterValidator, table: Dict[str, Any], section: str, key: str,
             default: int, minimum: Optional[int] = None) -> int:
    if key not in table:
        return default
    value = v.check_int(f"{section}.{key}", table[key], minimum=minimum)
    return default if value is None else value


def _flag(v: ParameterValidator, table: Dict[str, Any], section: str, key: str,
          default: bool) -> bool:
    if key not in table:
        return default
    if not isinstance(table[key], bool):
        v.error(f"{section}.{key}", "expected true or false")
        return default
    return table[key]


def _linear_grid(v: ParameterValidator, table: Dict[str, Any], section: str, key: str,
                 **bounds) -> Optional[List[float]]:
    """A grid given either as a list under ``key`` or as key_start/key_stop/key_points."""
    spec_keys = (f"{key}_start", f"{key}_stop", f"{key}_points")
    if key in table:
        if any(k in table for k in spec_keys):
            v.error(f"{section}.{key}", "give either a list or start/stop/points, not both")
        return v.check_grid(f"{section}.{key}", table[key], **bounds)
    if not any(k in table for k in spec_keys):
        return None
    missing = [k for k in spec_keys if k not in table]
    if missing:
        v.error(f"{section}.{key}", f"missing {', '.join(missing)}")
        return None
    start = v.check_number(f"{section}.{spec_keys[0]}", table[spec_keys[0]], **bounds)
    stop = v.check_number(f"{section}.{spec_keys[1]}", table[spec_keys[1]])
    points = v.check_int(f"{section}.{spec_keys[2]}", table[spec_keys[2]], minimum=1)
    if start is None or stop is None or points is None:
        return None
    if points > 1 and not stop > start:
        v.error(f"{section}.{spec_keys[1]}", "must exceed the start value")
        return None
    return _grid(start, stop, points)


def _parse_field(v: ParameterValidator, raw: Mapping) -> FieldConfig:
    t = _section(v, raw, "field", ("amplitude", "frequency", "initial_phase", "phase_shift"))
    d = FieldConfig()
    return FieldConfig(
        amplitude=_number(v, t, "field", "amplitude", d.amplitude, minimum=0.0),
        frequency=_number(v, t, "field", "frequency", d.frequency, minimum=0.0, strict_min=True),
        initial_phase=_number(v, t, "field", "initial_phase", d.initial_phase),
        phase_shift=_number(v, t, "field", "phase_shift", d.phase_shift),
    )


def _parse_sequence(v: ParameterValidator, raw: Mapping) -> SequenceConfig:
    t = _section(v, raw, "sequence", ("family", "repetitions", "tau", "pi_width", "readout"))
    d = SequenceConfig()
    family = d.family
    if "family" in t:
        choice = v.check_choice("sequence.family", t["family"], [f.label for f in SequenceFamily])
        if choice is not None:
            family = SequenceFamily.parse(choice)
    readout = d.readout
    if "readout" in t:
        choice = v.check_choice("sequence.readout", t["readout"], ["quadrature", "in_phase"])
        if choice is not None:
            readout = Readout[choice.upper()]
    tau = None
    if "tau" in t:
        tau = v.check_number("sequence.tau", t["tau"], minimum=0.0, strict_min=True)
    return SequenceConfig(
        family=family,
        repetitions=_integer(v, t, "sequence", "repetitions", d.repetitions, minimum=1),
        tau=tau,
        pi_width=_number(v, t, "sequence", "pi_width", d.pi_width, minimum=0.0),
        readout=readout,
    )


def _parse_coherence(v: ParameterValidator, t: Dict[str, Any]) -> Dict[int, CoherenceEntry]:
    table = dict(DEFAULT_COHERENCE_TABLE)
    raw = t.get("coherence", {})
    if not isinstance(raw, Mapping):
        v.error("sensor.coherence", "must be a table keyed by pulse count")
        return table
    for key, entry in raw.items():
        path = f"sensor.coherence.{key}"
        if not (isinstance(key, str) and key.isdigit() and int(key) >= 1):
            v.error(path, "key must be a positive pulse count")
            continue
        if not isinstance(entry, Mapping):
            v.error(path, "must be a table with t2 and p")
            continue
        v.check_keys(path, dict(entry), ("t2", "p", "t2_error", "p_error"))
        base = table.get(int(key))
        values = {}
        for name in ("t2", "p", "t2_error", "p_error"):
            if name in entry:
                values[name] = v.check_number(f"{path}.{name}", entry[name], minimum=0.0,
                                              strict_min=name in ("t2", "p"))
            elif base is not None:
                values[name] = getattr(base, name)
            elif name in ("t2", "p"):
                v.error(f"{path}.{name}", "required for a new pulse count")
                values[name] = None
            else:
                values[name] = 0.0
        if any(values[name] is None for name in values):
            continue
        built = v.guard(path, lambda: CoherenceEntry(**values))
        if built is not None:
            table[int(key)] = built
    return table


def _parse_sensor(v: ParameterValidator, raw: Mapping) -> SensorConfig:
    t = _section(v, raw, "sensor", ("n_nv", "bright_rate", "dark_rate", "gamma_e", "coherence"))
    d = SensorConfig()
    return SensorConfig(
        n_nv=_integer(v, t, "sensor", "n_nv", d.n_nv, minimum=1),
        bright_rate=_number(v, t, "sensor", "bright_rate", d.bright_rate, minimum=0.0),
        dark_rate=_number(v, t, "sensor", "dark_rate", d.dark_rate, minimum=0.0),
        gamma_e=_number(v, t, "sensor", "gamma_e", d.gamma_e, minimum=0.0, strict_min=True),
        coherence=_parse_coherence(v, t),
    )


def _parse_sweep(v: ParameterValidator, raw: Mapping) -> SweepConfig:
    t = _section(v, raw, "sweep", (
        "n_tau", "n_tau_start", "n_tau_stop", "n_tau_points", "phase_shifts",
        "delta_phi", "delta_phi_start", "delta_phi_stop", "delta_phi_points",
        "sequences", "amplitudes", "n_measurements", "per_sequence_rates"))
    d = SweepConfig()
    n_tau = _linear_grid(v, t, "sweep", "n_tau", minimum=0.0, strict_min=True) or d.n_tau
    delta_phi = _linear_grid(v, t, "sweep", "delta_phi")
    phase_shifts = d.phase_shifts
    if "phase_shifts" in t:
        phase_shifts = v.check_grid("sweep.phase_shifts", t["phase_shifts"],
                                    monotone=False) or d.phase_shifts
    amplitudes = d.amplitudes
    if "amplitudes" in t:
        amplitudes = v.check_grid("sweep.amplitudes", t["amplitudes"], minimum=0.0,
                                  strict_min=True) or d.amplitudes
    sequences = d.sequences
    if "sequences" in t:
        if not (isinstance(t["sequences"], list) and t["sequences"]
                and all(isinstance(s, str) for s in t["sequences"])):
            v.error("sweep.sequences", "must be a nonempty list of labels like 'xy8-1'")
        else:
            for i, label in enumerate(t["sequences"]):
                v.guard(f"sweep.sequences[{i}]", lambda: _check_label(label))
            sequences = list(t["sequences"])
    n_measurements = d.n_measurements
    if "n_measurements" in t:
        values = t["n_measurements"]
        if not isinstance(values, list) or not values:
            v.error("sweep.n_measurements", "must be a nonempty list of integers")
        else:
            checked = [v.check_int(f"sweep.n_measurements[{i}]", x, minimum=1)
                       for i, x in enumerate(values)]
            if all(c is not None for c in checked):
                n_measurements = [int(c) for c in checked if c is not None]
    return SweepConfig(
        n_tau=n_tau, phase_shifts=phase_shifts, delta_phi=delta_phi, sequences=sequences,
        amplitudes=amplitudes, n_measurements=n_measurements,
        per_sequence_rates=_flag(v, t, "sweep", "per_sequence_rates", d.per_sequence_rates),
    )


def _check_label(label: str) -> None:
    family, reps = parse_sequence_label(label)
    DecouplingSequence(family, reps, 1.0)


def _parse_monte_carlo(v: ParameterValidator, raw: Mapping) -> MonteCarloConfig:
    t = _section(v, raw, "monte_carlo", ("enabled", "n_measurements", "n_trials",
                                         "projection_noise", "delta_phi"))
    d = MonteCarloConfig()
    return MonteCarloConfig(
        enabled=_flag(v, t, "monte_carlo", "enabled", d.enabled),
        n_measurements=_integer(v, t, "monte_carlo", "n_measurements", d.n_measurements, 1),
        n_trials=_integer(v, t, "monte_carlo", "n_trials", d.n_trials, 2),
        projection_noise=_flag(v, t, "monte_carlo", "projection_noise", d.projection_noise),
        delta_phi=_number(v, t, "monte_carlo", "delta_phi", d.delta_phi),
    )


def _parse_fit(v: ParameterValidator, raw: Mapping) -> FitConfig:
    t = _section(v, raw, "fit", ("enabled", "noise_sigma", "uniform_weights", "multistart",
                                 "decay_points", "decay_span"))
    d = FitConfig()
    return FitConfig(
        enabled=_flag(v, t, "fit", "enabled", d.enabled),
        noise_sigma=_number(v, t, "fit", "noise_sigma", d.noise_sigma, minimum=0.0,
                            strict_min=True),
        uniform_weights=_flag(v, t, "fit", "uniform_weights", d.uniform_weights),
        multistart=_integer(v, t, "fit", "multistart", d.multistart, minimum=0),
        decay_points=_integer(v, t, "fit", "decay_points", d.decay_points, minimum=4),
        decay_span=_number(v, t, "fit", "decay_span", d.decay_span, minimum=0.0,
                           strict_min=True),
    )


def _parse_prospect(v: ParameterValidator, raw: Mapping) -> ProspectConfig:
    t = _section(v, raw, "prospect", ("n_nv", "t2", "amplitude", "total_time"))
    d = ProspectConfig()
    return ProspectConfig(
        n_nv=_number(v, t, "prospect", "n_nv", d.n_nv, minimum=0.0, strict_min=True),
        t2=_number(v, t, "prospect", "t2", d.t2, minimum=0.0, strict_min=True),
        amplitude=_number(v, t, "prospect", "amplitude", d.amplitude, minimum=0.0,
                          strict_min=True),
        total_time=_number(v, t, "prospect", "total_time", d.total_time, minimum=0.0,
                           strict_min=True),
    )


def _check_domain(v: ParameterValidator, config: ScenarioConfig) -> None:
    """Cross-field rules that need built domain objects."""
    if v.errors:
        return
    f = config.field.frequency
    if config.sequence.tau is None:
        v.guard("sequence.pi_width", lambda: resonance_tau(f, config.sequence.pi_width))
    v.guard("field", config.ac_field)
    v.guard("sequence", config.build_sequence)
    v.guard("sensor", config.build_sensor)
    if config.scenario in ("slope-vs-N", "slope-vs-B", "limit-curves"):
        v.guard("sequence.pi_width", lambda: resonance_tau(f, config.sequence.pi_width))
    if config.scenario in ("time-sweep", "phase-deviation-sweep"):
        n = config.sequence.repetitions * len(config.sequence.family.unit)
        smallest = config.sweep.n_tau[0]
        v.check_rule("sweep.n_tau", smallest / n > config.sequence.pi_width,
                     f"N tau = {smallest:g} s leaves tau at or below the pi pulse width")


def build_config(raw: Mapping, overrides: Optional[Mapping[str, Any]] = None) -> ScenarioConfig:
    """Validate a parsed mapping (plus command-line overrides) into a ScenarioConfig.

    Raises:
        ConfigError: With every violation found, path-qualified.
    """
    raw = dict(raw)
    for key, value in (overrides or {}).items():
        if value is not None:
            raw[key] = value
    v = ParameterValidator()
    v.check_keys("", raw, TOP_LEVEL_KEYS)
    d = ScenarioConfig()

    scenario = d.scenario
    if "scenario" in raw:
        if raw["scenario"] in SCENARIOS:
            scenario = raw["scenario"]
        else:
            v.error("scenario", f"unknown scenario {raw['scenario']!r}; expected one of "
                                f"{', '.join(SCENARIOS)}")
    seed = d.seed
    if "seed" in raw:
        checked = v.check_int("seed", raw["seed"], minimum=0)
        if checked is not None and v.check_rule("seed", checked < 2 ** 64,
                                                "must fit in 64 bits"):
            seed = checked
    threads = d.threads
    if "threads" in raw:
        checked = v.check_int("threads", raw["threads"], minimum=1)
        threads = d.threads if checked is None else checked
    out_dir = d.out_dir
    if "out_dir" in raw:
        if isinstance(raw["out_dir"], str) and raw["out_dir"]:
            out_dir = raw["out_dir"]
        else:
            v.error("out_dir", "must be a nonempty path string")

    config = ScenarioConfig(
        scenario=scenario,
        seed=seed,
        threads=threads,
        out_dir=out_dir,
        field=_parse_field(v, raw),
        sequence=_parse_sequence(v, raw),
        sensor=_parse_sensor(v, raw),
        sweep=_parse_sweep(v, raw),
        monte_carlo=_parse_monte_carlo(v, raw),
        fit=_parse_fit(v, raw),
        prospect=_parse_prospect(v, raw),
    )
    _check_domain(v, config)

    for violation in v.violations:
        logger.warning(LogTags.CONFIG, "%s: %s", violation.path, violation.message)
    if v.errors:
        raise ConfigError(v.violations)
    return config


def validate_config(raw_text: str, overrides: Optional[Mapping[str, Any]] = None) -> ScenarioConfig:
    """Parse TOML text, apply defaults and overrides, and validate.

    Raises:
        ConfigError: On a TOML syntax error or any rejected field.
    """
    try:
        raw = tomllib.loads(raw_text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([Violation("", f"parse error: {exc}")]) from exc
    return build_config(raw, overrides)
