"""Tests for the signal model, deviations, variance, SNR and sensitivity."""

import math

import numpy as np
import pytest

from acmagsim.errors import InvalidParameterError, MissingCoherenceError, ResonanceError
from acmagsim.model import (
    AcField,
    CoherenceEntry,
    ReferenceParams,
    Readout,
    SensorEnsemble,
    SequenceFamily,
    build_sequence,
    default_sensor,
    resonance_tau,
)
from acmagsim.physics import (
    closed_form_phase,
    coherence_envelope,
    expected_signal,
    measurement_variance,
    minimum_detectable_phase,
    phase_sensitivity,
    phase_shift_limit,
    projected_phase_sensitivity,
    signal_deviation_exact,
    signal_deviation_linear,
    snr,
)
from acmagsim.physics.signal import (
    deviation_curves,
    readout_sign,
    readout_variance,
    signal_curve,
    signal_point,
    spin_polarization,
)
from tests.test_tags import TestTags, tag_test


@pytest.fixture
def params():
    return ReferenceParams()


class TestCoherenceEnvelope:
    """Table lookup and log-log interpolation."""

    @tag_test(TestTags.BASIC)
    def test_tabulated_entry(self):
        envelope = coherence_envelope(default_sensor(), 8)
        assert envelope.t2 == pytest.approx(140e-6)
        assert envelope.p == pytest.approx(0.97)
        assert not envelope.interpolated
        assert float(envelope.envelope(140e-6)) == pytest.approx(math.exp(-1))

    @tag_test(TestTags.CORNERS)
    def test_interpolated_entry_lies_between_neighbours(self):
        envelope = coherence_envelope(default_sensor(), 16)
        assert envelope.interpolated
        assert 140e-6 < envelope.t2 < 340e-6
        # N = 16 sits halfway between 8 and 32 in log N
        assert envelope.t2 == pytest.approx(math.sqrt(140e-6 * 340e-6), rel=1e-12)
        assert envelope.p == pytest.approx(0.5 * (0.97 + 1.3), rel=1e-12)

    @tag_test(TestTags.INVALID)
    def test_outside_table(self):
        with pytest.raises(MissingCoherenceError) as info:
            coherence_envelope(default_sensor(), 512)
        assert info.value.to_dict()["available"] == [1, 2, 4, 8, 32, 128, 256]


class TestExpectedSignal:
    """Closed-form signal and its readout parity."""

    @tag_test(TestTags.BASIC)
    def test_formula(self, params):
        field = params.ac_field()
        seq = params.sequence()
        sensor = params.sensor()
        phi = closed_form_phase(field, seq)
        decay = math.exp(-(seq.free_precession_time / 140e-6) ** 0.97)
        # XY8 has four Y pulses, so the quadrature sign is -1
        expected = -sensor.signal_prefactor * decay * math.sin(phi)
        assert readout_sign(seq) == -1.0
        assert expected_signal(field, seq, sensor) == pytest.approx(expected, rel=1e-12, abs=1e-15)

    @tag_test(TestTags.BASIC)
    def test_bounded_by_prefactor(self, params):
        sensor = params.sensor()
        seq = params.sequence()
        for phase in np.linspace(0, 2 * math.pi, 25):
            field = AcField(amplitude=2e-6, frequency=200e3, initial_phase=float(phase))
            assert abs(expected_signal(field, seq, sensor)) <= sensor.signal_prefactor

    @tag_test(TestTags.BASIC)
    def test_in_phase_readout(self, params):
        sensor = params.sensor()
        seq = params.sequence().with_readout(Readout.IN_PHASE)
        field = AcField(amplitude=0.0, frequency=200e3)
        decay = math.exp(-(seq.free_precession_time / 140e-6) ** 0.97)
        # four X pulses as well; zero field leaves cos(0) = 1
        assert expected_signal(field, seq, sensor) == pytest.approx(
            -sensor.signal_prefactor * decay, rel=1e-12)

    @tag_test(TestTags.BASIC)
    def test_curve_matches_pointwise(self, params):
        field, seq, sensor = params.ac_field(), params.sequence(), params.sensor()
        free_times = np.linspace(4e-6, 40e-6, 9)
        curve = signal_curve(free_times, field, seq, sensor)
        for t, s in zip(free_times, curve):
            assert s == pytest.approx(
                expected_signal(field, seq.with_tau(t / 8), sensor), rel=1e-12, abs=1e-15)

    @tag_test(TestTags.BASIC)
    def test_polarization_is_bounded(self, params):
        z = spin_polarization(params.ac_field(), params.sequence(), params.sensor())
        assert -1.0 <= z <= 1.0


class TestDeviation:
    """Linear and exact response to a phase shift."""

    @tag_test(TestTags.BASIC)
    def test_small_shift_linear_matches_exact(self, params):
        field, seq, sensor = params.ac_field(), params.sequence(), params.sensor()
        dphi = 1e-4
        linear = signal_deviation_linear(field, seq, sensor, dphi)
        exact = signal_deviation_exact(field, seq, sensor, dphi).prefactored
        assert linear == pytest.approx(exact, rel=1e-3)

    @tag_test(TestTags.BASIC)
    def test_zero_shift(self, params):
        field, seq, sensor = params.ac_field(), params.sequence(), params.sensor()
        assert signal_deviation_linear(field, seq, sensor, 0.0) == 0.0
        result = signal_deviation_exact(field, seq, sensor, 0.0)
        assert result.prefactored == 0.0
        assert result.unprefactored == 0.0

    @tag_test(TestTags.BASIC)
    def test_unprefactored_is_bounded(self, params):
        field, seq, sensor = params.ac_field(), params.sequence(), params.sensor()
        for dphi in np.linspace(-math.pi, math.pi, 13):
            assert 0.0 <= signal_deviation_exact(field, seq, sensor, float(dphi)).unprefactored <= 2.0

    @tag_test(TestTags.BASIC)
    def test_curves_match_pointwise(self, params):
        field, seq, sensor = params.ac_field(), params.sequence(), params.sensor()
        free_times = np.array([10e-6, 19.008e-6, 30e-6])
        linear, exact = deviation_curves(free_times, field, seq, sensor, 0.05 * math.pi)
        for t, lin, ex in zip(free_times, linear, exact):
            point = seq.with_tau(t / 8)
            assert lin == pytest.approx(
                signal_deviation_linear(field, point, sensor, 0.05 * math.pi), rel=1e-9, abs=1e-15)
            assert ex == pytest.approx(
                signal_deviation_exact(field, point, sensor, 0.05 * math.pi).prefactored,
                rel=1e-9, abs=1e-15)


class TestPhaseShiftLimit:
    """Range of phase shifts covered by the linear response."""

    @tag_test(TestTags.BASIC)
    def test_reference_value(self):
        field = AcField(amplitude=0.7e-6, frequency=200e3)
        seq = build_sequence(SequenceFamily.XY8, 1, resonance_tau(200e3, 124e-9), 124e-9)
        assert phase_shift_limit(field, seq) == pytest.approx(0.637, abs=1e-3)

    @tag_test(TestTags.BASIC)
    def test_inverse_in_amplitude_and_pulses(self):
        tau = resonance_tau(200e3, 124e-9)
        small = phase_shift_limit(AcField(amplitude=0.37e-6, frequency=200e3),
                                  build_sequence(SequenceFamily.XY8, 1, tau, 124e-9))
        large = phase_shift_limit(AcField(amplitude=0.74e-6, frequency=200e3),
                                  build_sequence(SequenceFamily.XY8, 2, tau, 124e-9))
        assert small == pytest.approx(4 * large, rel=1e-9)

    @tag_test(TestTags.INVALID)
    def test_zero_field(self):
        seq = build_sequence(SequenceFamily.XY8, 1, resonance_tau(200e3, 0.0))
        with pytest.raises(InvalidParameterError):
            phase_shift_limit(AcField(amplitude=0.0, frequency=200e3), seq)

    @tag_test(TestTags.INVALID)
    def test_off_resonance(self):
        seq = build_sequence(SequenceFamily.XY8, 1, 2.0e-6)
        with pytest.raises(ResonanceError):
            phase_shift_limit(AcField(amplitude=1e-6, frequency=200e3), seq)


class TestVarianceAndSnr:
    """Shot-noise variance and the two SNR forms."""

    @tag_test(TestTags.BASIC)
    def test_variance_formula(self, params):
        field, seq, sensor = params.ac_field(), params.sequence(), params.sensor()
        z = spin_polarization(field, seq, sensor)
        r0, r1 = sensor.bright_rate, sensor.dark_rate
        expected = (r0 + r1) / 2 + (r0 - r1) / 2 * z + (r0 - r1) ** 2 / 4 * (1 - z * z)
        assert measurement_variance(field, seq, sensor) == pytest.approx(expected, rel=1e-14)

    @tag_test(TestTags.BASIC)
    def test_variance_extremes(self):
        sensor = SensorEnsemble(bright_rate=1.0, dark_rate=0.2,
                                coherence_table={8: CoherenceEntry(1.0, 1.0)})
        seq = build_sequence(SequenceFamily.XY8, 1, resonance_tau(200e3, 0.0))
        # no field and quadrature readout puts the spin on the equator: z = 0
        field = AcField(amplitude=0.0, frequency=200e3)
        assert measurement_variance(field, seq, sensor) == pytest.approx(0.6 + 0.16, rel=1e-9)

    @tag_test(TestTags.CORNERS)
    def test_equal_rates_give_poisson_variance(self):
        z = np.linspace(-1.0, 1.0, 11)
        np.testing.assert_allclose(readout_variance(0.47, 0.47, z), np.full(11, 0.47),
                                   rtol=1e-15)

    @tag_test(TestTags.BASIC)
    def test_fully_decayed_variance(self):
        # z = 0 once exp(-D) has vanished
        assert readout_variance(0.50, 0.46, 0.0) == pytest.approx(0.4804, rel=1e-12)

    @tag_test(TestTags.BASIC)
    def test_snr_scales_with_root_measurements(self, params):
        field, seq, sensor = params.ac_field(), params.sequence(), params.sensor()
        one = snr(field, seq, sensor, 0.01 * math.pi, 10000)
        four = snr(field, seq, sensor, 0.01 * math.pi, 40000)
        assert four.full == pytest.approx(2 * one.full, rel=1e-12)
        assert four.long_time == pytest.approx(2 * one.long_time, rel=1e-12)

    @tag_test(TestTags.BASIC)
    def test_reference_snr(self, params):
        field, seq, sensor = params.ac_field(), params.sequence(), params.sensor()
        result = snr(field, seq, sensor, 0.01 * math.pi, 10000)
        assert result.full == pytest.approx(1.048, rel=0.03)
        assert result.long_time == pytest.approx(result.full, rel=0.05)

    @tag_test(TestTags.INVALID)
    def test_snr_needs_measurements(self, params):
        with pytest.raises(InvalidParameterError):
            snr(params.ac_field(), params.sequence(), params.sensor(), 0.01, 0)

    @tag_test(TestTags.BASIC)
    def test_signal_point_collects_everything(self, params):
        field, seq, sensor = params.ac_field(), params.sequence(), params.sensor()
        point = signal_point(field, seq, sensor, 0.01 * math.pi, 10000)
        assert point.at_resonance
        assert point.free_precession_time == pytest.approx(19.008e-6)
        assert point.signal == pytest.approx(expected_signal(field, seq, sensor))
        assert point.snr == pytest.approx(snr(field, seq, sensor, 0.01 * math.pi, 10000).full)


class TestSensitivity:
    """Phase sensitivity and minimum detectable phase."""

    @staticmethod
    def sensor():
        return default_sensor().with_coherence({256: CoherenceEntry(t2=1e-3, p=1.7)})

    @tag_test(TestTags.BASIC)
    def test_reference_value(self):
        eta = phase_sensitivity(self.sensor(), 1e-6, 256)
        assert eta == pytest.approx(3.30e-3, rel=2e-3)

    @tag_test(TestTags.BASIC)
    def test_minimum_detectable_phase(self):
        eta = phase_sensitivity(self.sensor(), 1e-6, 256)
        assert minimum_detectable_phase(self.sensor(), 1e-6, 256, 4.0) == pytest.approx(eta / 2)

    @tag_test(TestTags.BASIC)
    def test_projection_matches_tabulated_sensor(self):
        sensor = self.sensor()
        eta = projected_phase_sensitivity(1e-6, sensor.n_nv, 1e-3, sensor.contrast)
        assert eta == pytest.approx(phase_sensitivity(sensor, 1e-6, 256), rel=1e-12)

    @tag_test(TestTags.BASIC)
    def test_dense_ensemble_projection(self):
        eta = projected_phase_sensitivity(1e-6, 1e11, 100e-6, 0.03)
        assert 0 < eta < 1e-6

    @tag_test(TestTags.INVALID)
    def test_invalid_inputs(self):
        with pytest.raises(InvalidParameterError):
            phase_sensitivity(self.sensor(), 0.0, 256)
        with pytest.raises(InvalidParameterError):
            minimum_detectable_phase(self.sensor(), 1e-6, 256, 0.0)
        with pytest.raises(InvalidParameterError):
            projected_phase_sensitivity(1e-6, 60, 1e-3, 1.5)
        with pytest.raises(MissingCoherenceError):
            phase_sensitivity(self.sensor(), 1e-6, 8)
