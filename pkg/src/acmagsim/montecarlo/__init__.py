"""Photon shot-noise Monte Carlo."""

from acmagsim.montecarlo.shot_noise import (
    McConfig,
    McOutcome,
    estimate_empirical_snr,
    run_experiment,
    simulate_readout_pair,
)

__all__ = [
    "McConfig",
    "McOutcome",
    "estimate_empirical_snr",
    "run_experiment",
    "simulate_readout_pair",
]
