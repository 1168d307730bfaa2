"""Tests for the photon shot-noise Monte Carlo."""

import math

import numpy as np
import pytest

from acmagsim.errors import InvalidParameterError, ZeroVarianceError
from acmagsim.model import ReferenceParams, SensorEnsemble
from acmagsim.montecarlo import McConfig, estimate_empirical_snr, run_experiment, simulate_readout_pair
from acmagsim.montecarlo.shot_noise import (
    dark_probability,
    empirical_operator_variance,
    stream_generator,
)
from acmagsim.physics import measurement_variance, signal_deviation_exact, snr
from tests.test_tags import TestTags, tag_test


@pytest.fixture
def setup():
    params = ReferenceParams()
    return params.ac_field(0.01 * math.pi), params.sequence(), params.sensor()


class TestMcConfig:
    """Settings validation."""

    @tag_test(TestTags.BASIC)
    def test_readouts_per_branch(self):
        assert McConfig(n_measurements=10000, seed=1).readouts_per_branch == 5000
        assert McConfig(n_measurements=3, seed=1).readouts_per_branch == 2

    @tag_test(TestTags.BASIC)
    def test_keyed_extends_stream_key(self):
        mc = McConfig(n_measurements=10, seed=1).keyed(3).keyed(4, 5)
        assert mc.stream_key == (3, 4, 5)

    @tag_test(TestTags.INVALID)
    @pytest.mark.parametrize("kwargs", [
        {"n_measurements": 0, "seed": 0},
        {"n_measurements": 10, "seed": -1},
        {"n_measurements": 10, "seed": 2 ** 64},
        {"n_measurements": 10, "seed": 0, "threads": 0},
        {"n_measurements": 10, "seed": 0, "n_trials": 0},
        {"n_measurements": True, "seed": 0},
        {"n_measurements": 10.0, "seed": 0},
    ])
    def test_rejects(self, kwargs):
        with pytest.raises(InvalidParameterError):
            McConfig(**kwargs)


class TestReadoutDraws:
    """Single readout pairs and their moments."""

    @tag_test(TestTags.BASIC)
    def test_counts_are_nonnegative_integers(self):
        sensor = SensorEnsemble(bright_rate=0.5013, dark_rate=0.4597, n_nv=60)
        a, b = simulate_readout_pair(0.3, sensor, stream_generator(5), n_readouts=4, size=100)
        assert a.dtype == np.int64 and b.dtype == np.int64
        assert a.shape == (100,) and b.shape == (100,)
        assert (a >= 0).all() and (b >= 0).all()

    @tag_test(TestTags.STATISTICAL)
    def test_mean_counts(self):
        sensor = SensorEnsemble(bright_rate=0.5, dark_rate=0.2, n_nv=10)
        size = 20000
        a, b = simulate_readout_pair(0.25, sensor, stream_generator(11), size=size,
                                     projection_noise=False)
        mean_a = 10 * (0.75 * 0.5 + 0.25 * 0.2)
        mean_b = 10 * (0.25 * 0.5 + 0.75 * 0.2)
        assert abs(a.mean() - mean_a) < 5 * math.sqrt(mean_a / size)
        assert abs(b.mean() - mean_b) < 5 * math.sqrt(mean_b / size)
        # without projection noise the counts are plain Poisson
        assert a.var(ddof=1) == pytest.approx(mean_a, rel=0.05)

    @tag_test(TestTags.STATISTICAL)
    def test_operator_variance(self, setup):
        _, seq, sensor = setup
        field = ReferenceParams().ac_field()
        p_dark = dark_probability(field, seq, sensor)
        var, se = empirical_operator_variance(p_dark, sensor, stream_generator(3), 100000)
        expected = measurement_variance(field, seq, sensor)
        assert expected == pytest.approx(0.48093, abs=5e-5)
        assert abs(var - expected) < 3 * se

    @tag_test(TestTags.INVALID)
    def test_rejects_bad_probability(self):
        sensor = SensorEnsemble(bright_rate=0.5, dark_rate=0.2)
        with pytest.raises(InvalidParameterError):
            simulate_readout_pair(1.5, sensor, stream_generator(0))

    @tag_test(TestTags.INVALID, TestTags.CORNERS)
    def test_rejects_counter_overflow(self, setup):
        field, seq, _ = setup
        sensor = SensorEnsemble(bright_rate=0.5, dark_rate=0.2, n_nv=2 ** 40,
                                coherence_table={8: ReferenceParams().coherence[8]})
        with pytest.raises(InvalidParameterError):
            simulate_readout_pair(0.5, sensor, stream_generator(0), n_readouts=2 ** 23)
        with pytest.raises(InvalidParameterError):
            run_experiment(field, seq, sensor, McConfig(n_measurements=2 ** 24, seed=0))


class TestEmpiricalSnr:
    """Ratio of the mean shift to the reference spread."""

    @tag_test(TestTags.BASIC)
    def test_value(self):
        assert estimate_empirical_snr([2.0, 4.0], [0.0, 2.0]) == pytest.approx(2.0 / math.sqrt(2))

    @tag_test(TestTags.INVALID)
    def test_empty(self):
        with pytest.raises(InvalidParameterError):
            estimate_empirical_snr([], [1.0, 2.0])

    @tag_test(TestTags.INVALID, TestTags.CORNERS)
    def test_zero_variance(self):
        with pytest.raises(ZeroVarianceError):
            estimate_empirical_snr([1.0, 2.0], [3.0, 3.0, 3.0])


class TestRunExperiment:
    """Seeded experiments: determinism and agreement with the analytic SNR."""

    @tag_test(TestTags.BASIC)
    def test_same_seed_same_numbers_any_thread_count(self, setup):
        field, seq, sensor = setup
        one = run_experiment(field, seq, sensor, McConfig(n_measurements=1000, seed=42,
                                                          n_trials=600, threads=1))
        four = run_experiment(field, seq, sensor, McConfig(n_measurements=1000, seed=42,
                                                           n_trials=600, threads=4))
        np.testing.assert_array_equal(one.counts_a, four.counts_a)
        np.testing.assert_array_equal(one.reference_counts_b, four.reference_counts_b)
        np.testing.assert_array_equal(one.signals, four.signals)

    @tag_test(TestTags.BASIC)
    def test_seed_and_key_change_the_draws(self, setup):
        field, seq, sensor = setup
        base = McConfig(n_measurements=1000, seed=42, n_trials=50)
        a = run_experiment(field, seq, sensor, base)
        b = run_experiment(field, seq, sensor, McConfig(n_measurements=1000, seed=43, n_trials=50))
        c = run_experiment(field, seq, sensor, base.keyed(1))
        assert not np.array_equal(a.counts_a, b.counts_a)
        assert not np.array_equal(a.counts_a, c.counts_a)

    @tag_test(TestTags.BASIC)
    def test_outcome_shape(self, setup):
        field, seq, sensor = setup
        outcome = run_experiment(field, seq, sensor, McConfig(n_measurements=100, seed=1,
                                                              n_trials=300))
        assert outcome.n_trials == 300
        assert outcome.signals.shape == (300,)
        assert ((outcome.signals >= -1) & (outcome.signals <= 1)).all()
        assert outcome.p_dark != outcome.reference_p_dark
        summary = outcome.summary()
        assert summary["n_trials"] == 300
        assert summary["counts_a_total"] == int(outcome.counts_a.sum())

    @tag_test(TestTags.STATISTICAL)
    def test_snr_matches_analytic(self, setup):
        field, seq, sensor = setup
        dphi = 0.01 * math.pi
        reference = ReferenceParams().ac_field()
        analytic = snr(reference, seq, sensor, dphi, 10000).full
        outcome = run_experiment(field, seq, sensor, McConfig(n_measurements=10000, seed=7,
                                                              n_trials=1000))
        assert analytic == pytest.approx(1.048, rel=0.03)
        assert abs(outcome.snr - analytic) < 3 * outcome.snr_std_error

    @tag_test(TestTags.STATISTICAL)
    def test_snr_matches_long_time_form(self, setup):
        field, seq, sensor = setup
        long_time = snr(ReferenceParams().ac_field(), seq, sensor, 0.01 * math.pi, 10000).long_time
        assert long_time == pytest.approx(1.0452, abs=1e-3)
        for seed in (17, 18, 19):
            outcome = run_experiment(field, seq, sensor, McConfig(n_measurements=10000, seed=seed,
                                                                  n_trials=1000))
            assert abs(outcome.snr - long_time) < 3 * outcome.snr_std_error

    @tag_test(TestTags.STATISTICAL)
    def test_snr_grows_with_root_measurements(self, setup):
        # 10^4 trials keep the ratio's own error near 1.5%
        field, seq, sensor = setup
        low = run_experiment(field, seq, sensor, McConfig(n_measurements=10000, seed=8,
                                                          n_trials=10000))
        high = run_experiment(field, seq, sensor, McConfig(n_measurements=40000, seed=8,
                                                           n_trials=10000))
        assert 1.9 < high.snr / low.snr < 2.1

    @tag_test(TestTags.STATISTICAL)
    def test_mean_deviation_matches_signal_change(self, setup):
        field, seq, sensor = setup
        outcome = run_experiment(field, seq, sensor, McConfig(n_measurements=10000, seed=9,
                                                              n_trials=1000))
        expected = signal_deviation_exact(ReferenceParams().ac_field(), seq, sensor,
                                          0.01 * math.pi).prefactored
        assert abs(outcome.deviation - expected) < 3 * outcome.deviation_std_error
