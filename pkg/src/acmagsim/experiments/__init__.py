"""Scenario configuration, runner and file output."""

from acmagsim.experiments.config import SCENARIOS, ScenarioConfig, build_config, validate_config
from acmagsim.experiments.io import Table, manifest_text, validate_manifest, write_outputs
from acmagsim.experiments.scenarios import ScenarioRun, derived_constants, run_scenario

__all__ = [
    "SCENARIOS",
    "ScenarioConfig",
    "build_config",
    "validate_config",
    "Table",
    "manifest_text",
    "validate_manifest",
    "write_outputs",
    "ScenarioRun",
    "derived_constants",
    "run_scenario",
]
