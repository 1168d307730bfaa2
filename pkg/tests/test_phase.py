"""Tests for the closed-form phase, its resonance limit and the quadrature oracle."""

import math

import numpy as np
import pytest

from acmagsim.constants import GAMMA_E
from acmagsim.errors import InvalidParameterError, ResonanceError
from acmagsim.model import AcField, ReferenceParams, SequenceFamily, build_sequence, resonance_tau
from acmagsim.physics import (
    approximate_resonant_slope,
    closed_form_phase,
    evaluate_phase,
    modulation_function,
    non_accumulation_time,
    phase_derivative,
    quadrature_phase_oracle,
)
from acmagsim.physics.phase import is_resonant, phase_curve
from acmagsim.physics.quadrature import composite_simpson, intervals_for, simpson_richardson
from tests.test_tags import TestTags, tag_test

PULSE_COUNTS = ((SequenceFamily.CPMG, 2), (SequenceFamily.CPMG, 4), (SequenceFamily.CPMG, 8),
                (SequenceFamily.CPMG, 16), (SequenceFamily.XY4, 1), (SequenceFamily.XY4, 2),
                (SequenceFamily.XY4, 4), (SequenceFamily.XY8, 1), (SequenceFamily.XY8, 2))


def reference_field(phase: float = 0.0) -> AcField:
    return AcField(amplitude=0.74e-6, frequency=200e3, initial_phase=phase)


def reference_sequence(repetitions: int = 1, pi_width: float = 124e-9):
    return build_sequence(SequenceFamily.XY8, repetitions, resonance_tau(200e3, pi_width), pi_width)


class TestResonantPhase:
    """Values at the resonance condition."""

    @tag_test(TestTags.BASIC)
    def test_resonance_detected(self):
        seq = reference_sequence()
        result = evaluate_phase(reference_field(), seq)
        assert result.at_resonance
        assert result.even_n
        assert is_resonant(reference_field(), seq)

    @tag_test(TestTags.BASIC)
    def test_phase_at_zero_field_phase(self):
        # 8 (gamma B / pi f) cos(pi f tau_pi)
        scale = GAMMA_E * 0.74e-6 / (math.pi * 200e3)
        expected = 8 * scale * math.cos(math.pi * 200e3 * 124e-9)
        phi = closed_form_phase(reference_field(0.0), reference_sequence())
        assert phi == pytest.approx(expected, rel=1e-9)
        assert phi == pytest.approx(1.654, abs=2e-3)

    @tag_test(TestTags.BASIC)
    def test_phase_vanishes_at_quarter_period(self):
        phi = closed_form_phase(reference_field(math.pi / 2), reference_sequence())
        assert abs(phi) < 1e-12

    @tag_test(TestTags.BASIC)
    def test_exact_and_approximate_slopes(self):
        field = reference_field(math.pi / 2)
        seq = reference_sequence()
        approx = approximate_resonant_slope(field, seq)
        exact = phase_derivative(field, seq)
        assert approx == pytest.approx(-1.659, abs=2e-3)
        assert exact == pytest.approx(approx * math.cos(math.pi * 200e3 * 124e-9), rel=1e-9)

    @tag_test(TestTags.BASIC)
    def test_slope_scales_with_pulse_count(self):
        field = reference_field(math.pi / 2)
        one = approximate_resonant_slope(field, reference_sequence(1))
        four = approximate_resonant_slope(field, reference_sequence(4))
        assert four == pytest.approx(4 * one, rel=1e-12)
        assert abs(phase_derivative(field, reference_sequence(4))) > abs(phase_derivative(
            field, reference_sequence(1)))

    @tag_test(TestTags.INVALID)
    def test_approximate_slope_needs_resonance(self):
        seq = build_sequence(SequenceFamily.XY8, 1, 2.0e-6, 124e-9)
        with pytest.raises(ResonanceError):
            approximate_resonant_slope(reference_field(), seq)

    @tag_test(TestTags.CORNERS)
    def test_limit_branch_is_continuous(self):
        field = reference_field(0.3)
        seq = reference_sequence()
        at_resonance = closed_form_phase(field, seq)
        offsets = np.logspace(-14, -6, 33)
        branches = set()
        for offset in np.concatenate([-offsets[::-1], [0.0], offsets]):
            nearby = seq.with_tau(seq.tau * (1 + offset))
            result = evaluate_phase(field, nearby)
            branches.add(result.at_resonance)
            # |dPhi/dtau| stays below 1e8 rad/s here
            drift = 1e8 * seq.tau * abs(offset)
            assert abs(result.phi - at_resonance) <= 1e-6 + drift
            assert result.phi == pytest.approx(quadrature_phase_oracle(field, nearby), abs=1e-6)
        assert branches == {True, False}

    @tag_test(TestTags.CORNERS)
    def test_odd_pulse_count_at_resonance(self):
        tau = resonance_tau(200e3, 124e-9)
        seq = build_sequence(SequenceFamily.CPMG, 3, tau, 124e-9)
        field = reference_field(0.4)
        result = evaluate_phase(field, seq)
        assert result.at_resonance
        assert not result.even_n
        assert result.phi == pytest.approx(quadrature_phase_oracle(field, seq), abs=1e-8)
        slope = approximate_resonant_slope(field, seq)
        assert slope > 0


class TestQuadratureOracle:
    """Closed form against numerical integration of the modulated field."""

    @tag_test(TestTags.ORACLE)
    def test_random_draws_agree(self):
        rng = np.random.default_rng(20240611)
        for _ in range(1000):
            family, reps = PULSE_COUNTS[int(rng.integers(len(PULSE_COUNTS)))]
            pi_width = float(rng.uniform(0.0, 300e-9))
            tau = float(rng.uniform(pi_width + 50e-9, 8e-6))
            field = AcField(amplitude=float(rng.uniform(0.1e-6, 2e-6)),
                            frequency=float(rng.uniform(50e3, 2e6)),
                            initial_phase=float(rng.uniform(0.0, 2 * math.pi)))
            seq = build_sequence(family, reps, tau, pi_width)
            assert seq.n_pulses in (2, 4, 8, 16)
            if evaluate_phase(field, seq).at_resonance:
                continue
            expected = quadrature_phase_oracle(field, seq)
            assert closed_form_phase(field, seq) == pytest.approx(
                expected, rel=0.0, abs=1e-8 * max(1.0, abs(expected)))

    @tag_test(TestTags.ORACLE)
    def test_resonant_limit_agrees(self):
        for reps in (1, 2):
            for phase in (0.0, 0.9, 2.5):
                field = reference_field(phase)
                seq = reference_sequence(reps)
                assert evaluate_phase(field, seq).at_resonance
                assert closed_form_phase(field, seq) == pytest.approx(
                    quadrature_phase_oracle(field, seq), abs=1e-6)

    @tag_test(TestTags.ORACLE)
    def test_hahn_echo_by_hand(self):
        # gamma B / (pi f) sin(u + phase) (1 - cos u) with u = pi f tau
        field = AcField(amplitude=1e-6, frequency=100e3, initial_phase=0.7)
        seq = build_sequence(SequenceFamily.HAHN, 1, 3e-6)
        u = math.pi * 100e3 * 3e-6
        expected = GAMMA_E * 1e-6 / (math.pi * 100e3) * math.sin(u + 0.7) * (1 - math.cos(u))
        assert closed_form_phase(field, seq) == pytest.approx(expected, rel=1e-10)
        assert quadrature_phase_oracle(field, seq) == pytest.approx(expected, rel=1e-8)

    @tag_test(TestTags.INVALID)
    def test_too_few_nodes(self):
        with pytest.raises(InvalidParameterError):
            quadrature_phase_oracle(reference_field(), reference_sequence(), nodes_per_half_period=10)


class TestQuadratureRules:
    """Composite Simpson and its Richardson refinement."""

    @tag_test(TestTags.BASIC)
    def test_simpson_is_exact_for_cubics(self):
        value = composite_simpson(lambda x: 4 * x ** 3 - 3 * x ** 2 + 1, -1.0, 2.0, 2)
        assert value == pytest.approx(15.0 - 9.0 + 3.0, rel=1e-14)

    @tag_test(TestTags.BASIC)
    def test_richardson_on_sine(self):
        n = intervals_for(2.5e-6, 200e3, 200)
        value = simpson_richardson(lambda t: np.sin(2 * math.pi * 200e3 * t), 0.0, 2.5e-6, n)
        expected = (1 - math.cos(2 * math.pi * 200e3 * 2.5e-6)) / (2 * math.pi * 200e3)
        assert value == pytest.approx(expected, rel=1e-12)

    @tag_test(TestTags.CORNERS)
    def test_empty_interval(self):
        assert composite_simpson(np.exp, 1.0, 1.0, 4) == 0.0

    @tag_test(TestTags.CORNERS)
    def test_interval_count_is_even(self):
        assert intervals_for(2.5e-6, 200e3, 200) in (200, 202)
        assert intervals_for(1e-9, 200e3, 200) == 2
        assert intervals_for(1.01e-6, 200e3, 11) % 2 == 0

    @tag_test(TestTags.INVALID)
    def test_odd_interval_count(self):
        with pytest.raises(InvalidParameterError):
            composite_simpson(np.sin, 0.0, 1.0, 3)


class TestPhaseDerivative:
    """Analytic d Phi / d phase against finite differences."""

    @tag_test(TestTags.BASIC)
    def test_matches_finite_difference(self):
        seq = build_sequence(SequenceFamily.XY4, 2, 3.1e-6, 80e-9)
        field = AcField(amplitude=0.5e-6, frequency=150e3, initial_phase=1.1)
        h = 1e-6
        numeric = (closed_form_phase(field.shifted(h), seq)
                   - closed_form_phase(field.shifted(-h), seq)) / (2 * h)
        assert phase_derivative(field, seq) == pytest.approx(numeric, rel=1e-6)

    @tag_test(TestTags.BASIC)
    def test_curve_matches_pointwise(self):
        field = reference_field(0.2)
        seq = reference_sequence()
        free_times = np.linspace(5e-6, 30e-6, 7)
        phi, dphi = phase_curve(free_times, field, seq)
        for t, p, d in zip(free_times, phi, dphi):
            point = seq.with_tau(t / seq.n_pulses)
            assert p == pytest.approx(closed_form_phase(field, point), rel=1e-12, abs=1e-15)
            assert d == pytest.approx(phase_derivative(field, point), rel=1e-12, abs=1e-15)

    @tag_test(TestTags.INVALID)
    def test_curve_rejects_spacing_inside_pulse(self):
        with pytest.raises(InvalidParameterError):
            phase_curve([0.5e-6, 10e-6], reference_field(), reference_sequence())


class TestNonAccumulation:
    """Zero crossing of the phase next to resonance."""

    @tag_test(TestTags.BASIC)
    def test_finite_pulses(self):
        field = ReferenceParams().ac_field()
        t = non_accumulation_time(field, SequenceFamily.XY8, 1, 124e-9)
        assert t == pytest.approx(19.008e-6, abs=1e-12)

    @tag_test(TestTags.BASIC)
    def test_ideal_pulses(self):
        field = ReferenceParams().ac_field()
        t = non_accumulation_time(field, SequenceFamily.XY8, 1, 0.0)
        assert t == pytest.approx(20e-6, abs=1e-12)

    @tag_test(TestTags.INVALID)
    def test_bracket_without_sign_change(self):
        field = ReferenceParams().ac_field()
        with pytest.raises(InvalidParameterError):
            non_accumulation_time(field, SequenceFamily.XY8, 1, 124e-9,
                                  bracket=(19.5e-6, 19.9e-6))


class TestModulationFunction:
    """Sign of the phase accrual along the timeline."""

    @tag_test(TestTags.BASIC)
    def test_signs(self):
        seq = build_sequence(SequenceFamily.CPMG, 2, 2e-6, 100e-9)
        assert modulation_function(seq, 0.0) == 1
        assert modulation_function(seq, 0.5e-6) == 1
        assert modulation_function(seq, 1.05e-6) == 0
        assert modulation_function(seq, 2e-6) == -1
        assert modulation_function(seq, seq.total_time) == 1

    @tag_test(TestTags.INVALID)
    def test_outside_window(self):
        seq = build_sequence(SequenceFamily.CPMG, 2, 2e-6, 100e-9)
        with pytest.raises(InvalidParameterError):
            modulation_function(seq, -1e-9)
        with pytest.raises(InvalidParameterError):
            modulation_function(seq, seq.total_time * 1.01)
