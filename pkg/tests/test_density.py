"""Tests for the density-matrix path."""

import math

import numpy as np
import pytest

from acmagsim.errors import InvalidParameterError
from acmagsim.model import (
    AcField,
    ReferenceParams,
    PulseAxis,
    Readout,
    SequenceFamily,
    build_sequence,
    default_sensor,
)
from acmagsim.physics import expected_signal
from acmagsim.physics.density import (
    SIGMA_Y,
    SIGMA_Z,
    SpinState,
    apply_half_pi,
    apply_pi,
    dephase,
    density_matrix_signal,
    evolve_through_sequence,
    free_precession,
    initialize,
    simulate_readout_expectations,
)
from acmagsim.physics.signal import CoherenceEnvelope
from tests.test_tags import TestTags, tag_test


class TestSpinState:
    """Density-matrix validation and single rotations."""

    @tag_test(TestTags.BASIC)
    def test_initial_state(self):
        state = initialize()
        assert state.bloch_vector == pytest.approx((0.0, 0.0, 1.0))
        assert state.purity == pytest.approx(1.0)

    @tag_test(TestTags.BASIC)
    def test_half_pi_x_points_along_minus_y(self):
        state = apply_half_pi(initialize(), PulseAxis.X)
        assert state.bloch_vector == pytest.approx((0.0, -1.0, 0.0), abs=1e-12)
        assert state.expectation(SIGMA_Y) == pytest.approx(-1.0)

    @tag_test(TestTags.BASIC)
    def test_pi_pulse_inverts(self):
        state = apply_pi(initialize(), PulseAxis.Y)
        assert state.expectation(SIGMA_Z) == pytest.approx(-1.0)

    @tag_test(TestTags.BASIC)
    def test_free_precession_rotates_about_z(self):
        state = free_precession(SpinState.from_bloch(1.0, 0.0, 0.0), math.pi / 2)
        assert state.bloch_vector == pytest.approx((0.0, 1.0, 0.0), abs=1e-12)

    @tag_test(TestTags.BASIC)
    def test_dephase_shrinks_coherence(self):
        state = dephase(SpinState.from_bloch(1.0, 0.0, 0.0), 0.25)
        assert state.bloch_vector == pytest.approx((0.25, 0.0, 0.0), abs=1e-12)
        assert state.purity < 1.0

    @tag_test(TestTags.INVALID)
    def test_rejects_bad_matrices(self):
        with pytest.raises(InvalidParameterError):
            SpinState(np.eye(3) / 3)
        with pytest.raises(InvalidParameterError):
            SpinState(np.eye(2))
        with pytest.raises(InvalidParameterError):
            SpinState(np.array([[0.5, 0.5], [0.0, 0.5]]))
        with pytest.raises(InvalidParameterError):
            SpinState.from_bloch(2.0, 0.0, 0.0)

    @tag_test(TestTags.INVALID)
    def test_sequence_needs_equatorial_input(self):
        params = ReferenceParams()
        with pytest.raises(InvalidParameterError):
            evolve_through_sequence(initialize(), params.ac_field(), params.sequence(),
                                    CoherenceEnvelope(1e-3, 1.0))


class TestClosedFormEquivalence:
    """Density-matrix signal equals the closed-form expected signal."""

    @tag_test(TestTags.ORACLE)
    def test_reference_point(self):
        params = ReferenceParams()
        field, seq, sensor = params.ac_field(0.05 * math.pi), params.sequence(), params.sensor()
        assert density_matrix_signal(field, seq, sensor) == pytest.approx(
            expected_signal(field, seq, sensor), abs=1e-9)

    @tag_test(TestTags.ORACLE)
    def test_sweep_over_families_and_phases(self):
        sensor = default_sensor()
        for family, reps in ((SequenceFamily.CPMG, 2), (SequenceFamily.XY4, 1),
                             (SequenceFamily.XY8, 1), (SequenceFamily.HAHN, 1)):
            for tau in (1.5e-6, 2.376e-6, 3.3e-6):
                for phase in (0.0, 0.9, 2.5):
                    field = AcField(amplitude=0.74e-6, frequency=200e3, initial_phase=phase)
                    seq = build_sequence(family, reps, tau, 124e-9)
                    assert density_matrix_signal(field, seq, sensor) == pytest.approx(
                        expected_signal(field, seq, sensor), abs=1e-9)

    @tag_test(TestTags.ORACLE)
    def test_in_phase_readout(self):
        params = ReferenceParams()
        field = params.ac_field()
        seq = params.sequence().with_readout(Readout.IN_PHASE)
        sensor = params.sensor()
        assert density_matrix_signal(field, seq, sensor) == pytest.approx(
            expected_signal(field, seq, sensor), abs=1e-9)

    @tag_test(TestTags.BASIC)
    def test_branch_photon_means(self):
        params = ReferenceParams()
        sensor = params.sensor()
        pair = simulate_readout_expectations(params.ac_field(), params.sequence(), sensor)
        # the two branches split the rates between them
        assert pair.branch_a + pair.branch_b == pytest.approx(
            sensor.bright_rate + sensor.dark_rate, rel=1e-12)
        for value in (pair.branch_a, pair.branch_b):
            assert sensor.dark_rate <= value <= sensor.bright_rate
