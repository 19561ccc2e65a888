"""Tests for the source/channel statistics against brute-force sums."""

import math

import numpy as np
import pytest

from sixstate import (
    ConvergenceError,
    EffectiveTransmittances,
    ParameterError,
    SetupParams,
    channel_transmittance,
    coincidence_probability,
    expected_qber,
    intrinsic_qber,
    misalignment_error,
    pair_number_tail,
    photon_pair_prob,
    qber_threshold,
    single_photon_weight,
)
from sixstate.spdc import _truncation_order

ETA_10KM_017 = 0.67608297539198177  # 10^-0.17, mpmath
W2_EXAMPLE = 0.0051226009152380302  # p_2(0.1) / 4, mpmath
P11_PERFECT_01 = 0.15026296018031555  # 2*0.1/1.1^3, mpmath


def brute_moments(brightness, n_max):
    """Direct fsum of the pair-number distribution and its mean."""
    probs = [photon_pair_prob(n, brightness) for n in range(n_max + 1)]
    return math.fsum(probs), math.fsum(n * p for n, p in enumerate(probs))


class TestChannel:
    def test_examples(self):
        assert channel_transmittance(0.17, 0.0) == 1.0
        assert channel_transmittance(0.0, 100.0) == 1.0
        assert channel_transmittance(0.17, 10.0) == pytest.approx(
            ETA_10KM_017, rel=1e-14)

    def test_negative_inputs_rejected(self):
        with pytest.raises(ParameterError):
            channel_transmittance(-0.1, 10.0)
        with pytest.raises(ParameterError):
            channel_transmittance(0.17, -1.0)

    def test_effective_transmittances_split_the_distance(self):
        setup = SetupParams(brightness=0.1, distance_km=20.0,
                            eta_det_alice=0.8, eta_det_bob=0.6)
        eta = EffectiveTransmittances.from_setup(setup)
        half = channel_transmittance(0.17, 10.0)
        assert eta.eta_a == pytest.approx(0.8 * half, rel=1e-14)
        assert eta.eta_b == pytest.approx(0.6 * half, rel=1e-14)


class TestPairDistribution:
    @pytest.mark.parametrize("brightness", [0.01, 0.1, 1.0, 10.0, 100.0])
    def test_normalization_and_mean(self, brightness):
        n_max = _truncation_order(brightness)
        total, mean = brute_moments(brightness, n_max)
        assert 1.0 - 1e-12 <= total <= 1.0 + 1e-12
        assert mean == pytest.approx(2.0 * brightness, rel=1e-10)

    def test_mean_photon_pair_number_at_035(self):
        n_max = _truncation_order(0.35)
        _, mean = brute_moments(0.35, n_max)
        assert mean == pytest.approx(0.7, rel=1e-10)

    @pytest.mark.parametrize("brightness", [0.05, 0.7, 3.0])
    def test_vacuum_term(self, brightness):
        assert photon_pair_prob(0, brightness) == pytest.approx(
            1.0 / (1.0 + brightness) ** 2, rel=1e-14)

    @pytest.mark.parametrize("n,brightness", [(0, 0.2), (3, 0.2), (10, 2.0)])
    def test_tail_matches_brute_force(self, n, brightness):
        total, _ = brute_moments(brightness, n)
        assert pair_number_tail(n, brightness) == pytest.approx(
            1.0 - total, abs=1e-13)

    def test_truncation_is_minimal(self):
        for brightness in (0.1, 1.0, 25.0):
            order = _truncation_order(brightness)
            assert pair_number_tail(order, brightness) < 1e-14
            assert pair_number_tail(order - 1, brightness) >= 1e-14

    def test_truncation_cap_breach(self):
        with pytest.raises(ConvergenceError):
            _truncation_order(5000.0)


class TestSinglePhotonWeight:
    def test_lossless_single_pair(self):
        for brightness in (0.05, 0.4, 2.0):
            expected = 2.0 * brightness / (1.0 + brightness) ** 3
            assert single_photon_weight(1, brightness, 1.0, 1.0) == pytest.approx(
                expected, rel=1e-14)

    def test_lossless_multiphoton_vanishes(self):
        for n in (2, 3, 7):
            assert single_photon_weight(n, 0.3, 1.0, 1.0) == 0.0

    def test_frozen_example(self):
        assert single_photon_weight(2, 0.1, 0.5, 0.5) == pytest.approx(
            W2_EXAMPLE, rel=1e-13)

    def test_never_exceeds_pair_probability(self):
        rng = np.random.default_rng(11)
        for _ in range(300):
            n = int(rng.integers(1, 40))
            brightness = float(10.0 ** rng.uniform(-3, 1.5))
            eta_a = float(rng.uniform(1e-3, 1.0))
            eta_b = float(rng.uniform(1e-3, 1.0))
            assert single_photon_weight(n, brightness, eta_a, eta_b) <= \
                photon_pair_prob(n, brightness) + 1e-15


class TestCoincidenceProbability:
    def test_perfect_setup_collapses_to_single_pair_term(self):
        setup = SetupParams(brightness=0.1)
        assert coincidence_probability(setup) == pytest.approx(
            P11_PERFECT_01, rel=1e-12)

    def test_weak_source_limit(self):
        setup = SetupParams(brightness=1e-9, distance_km=30.0,
                            eta_det_alice=0.3, eta_det_bob=0.3)
        eta = EffectiveTransmittances.from_setup(setup)
        ratio = coincidence_probability(setup) / (
            2.0 * setup.brightness * eta.eta_a * eta.eta_b)
        assert ratio == pytest.approx(1.0, abs=1e-6)

    def test_matches_brute_force_sum(self):
        setup = SetupParams(brightness=0.7, distance_km=40.0,
                            eta_det_alice=0.6, eta_det_bob=0.9)
        eta = EffectiveTransmittances.from_setup(setup)
        brute = math.fsum(
            single_photon_weight(n, 0.7, eta.eta_a, eta.eta_b)
            for n in range(1, _truncation_order(0.7) + 1))
        assert coincidence_probability(setup) == pytest.approx(brute, rel=1e-12)

    def test_monotone_in_distance(self):
        values = [coincidence_probability(
            SetupParams(brightness=0.1, distance_km=L, eta_det_alice=0.8,
                        eta_det_bob=0.8)) for L in (0.0, 20.0, 50.0, 100.0)]
        assert all(a > b for a, b in zip(values, values[1:]))


class TestQber:
    def test_intrinsic_examples(self):
        assert intrinsic_qber(1) == 0.0
        assert intrinsic_qber(3) == 0.25
        assert intrinsic_qber(10**6) == pytest.approx(0.499999, abs=1e-6)
        assert intrinsic_qber(10**6) < 0.5

    def test_intrinsic_strictly_increasing(self):
        values = [intrinsic_qber(n) for n in range(1, 200)]
        assert all(a < b for a, b in zip(values, values[1:]))

    def test_misalignment_examples(self):
        assert misalignment_error(0.0) == 0.0
        assert misalignment_error(0.5) == 0.5
        assert misalignment_error(0.03) == pytest.approx(0.0582, abs=1e-15)
        with pytest.raises(ParameterError):
            misalignment_error(0.6)

    def test_perfect_setup_is_error_free(self):
        for brightness in (0.05, 0.5, 5.0):
            assert expected_qber(SetupParams(brightness=brightness)) == 0.0

    def test_lossless_collapse_to_misalignment(self):
        for brightness in (0.05, 0.5, 5.0):
            for eta_m in (0.01, 0.03, 0.2):
                setup = SetupParams(brightness=brightness, misalignment=eta_m)
                assert expected_qber(setup) == misalignment_error(eta_m)

    def test_monotone_in_brightness(self):
        values = [expected_qber(SetupParams(
            brightness=b, distance_km=50.0, eta_det_alice=0.5,
            eta_det_bob=0.5)) for b in np.geomspace(1e-3, 20.0, 25)]
        assert all(b >= a - 1e-15 for a, b in zip(values, values[1:]))

    def test_bright_source_at_100km_breaks_threshold(self):
        setup = SetupParams(brightness=1.0, distance_km=100.0)
        assert expected_qber(setup) > qber_threshold()

    def test_in_physical_range(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            setup = SetupParams(
                brightness=float(10.0 ** rng.uniform(-3, 1.5)),
                distance_km=float(rng.uniform(0.0, 150.0)),
                eta_det_alice=float(rng.uniform(0.05, 1.0)),
                eta_det_bob=float(rng.uniform(0.05, 1.0)),
                misalignment=float(rng.uniform(0.0, 0.5)))
            assert 0.0 <= expected_qber(setup) <= 0.5


class TestSetupValidation:
    def test_rejects_bad_fields(self):
        with pytest.raises(ParameterError):
            SetupParams(brightness=0.0)
        with pytest.raises(ParameterError):
            SetupParams(brightness=0.1, distance_km=-1.0)
        with pytest.raises(ParameterError):
            SetupParams(brightness=0.1, eta_det_alice=0.0)
        with pytest.raises(ParameterError):
            SetupParams(brightness=0.1, eta_det_bob=1.2)
        with pytest.raises(ParameterError):
            SetupParams(brightness=0.1, misalignment=0.51)
