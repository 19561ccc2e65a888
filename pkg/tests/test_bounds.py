"""Tests for the entropy/fluctuation primitives.

Frozen expected values were computed beforehand with a 40-digit mpmath
oracle; property checks evaluate the closed forms directly.
"""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sixstate import (
    ParameterError,
    QberTriple,
    binary_entropy,
    conditional_entropy,
    entropy_bound,
    finite_size_correction,
    leak_ec,
    qber_fluctuation,
    worst_case_qber,
)

# mpmath, 40 digits
H_QUARTER = 0.8112781244591328
ZETA_1EM5_1E4 = 0.019343540975905646
ZETA_LIMIT_M1 = 0.41627730557884888
TWO_ZETA_1EM5_100 = 0.32204942554406728
LEAK_1000_005_12 = 343.67634853914735
S_ZERO_1E4_1EM10 = 0.70751375695225586


class TestBinaryEntropy:
    def test_degenerate_and_uniform(self):
        assert binary_entropy(0.0) == 0.0
        assert binary_entropy(1.0) == 0.0
        assert binary_entropy(0.5) == 1.0

    def test_quarter(self):
        assert binary_entropy(0.25) == pytest.approx(H_QUARTER, rel=1e-14)

    @given(st.floats(min_value=0.0, max_value=1.0))
    def test_symmetry(self, e):
        assert binary_entropy(e) == pytest.approx(binary_entropy(1.0 - e), abs=1e-12)

    def test_symmetry_random_grid(self):
        rng = np.random.default_rng(7)
        for e in rng.random(1000):
            assert abs(binary_entropy(e) - binary_entropy(1.0 - e)) <= 1e-12

    def test_boundary_clamp_and_domain_error(self):
        assert binary_entropy(-1e-13) == 0.0
        assert binary_entropy(1.0 + 1e-13) == 0.0
        with pytest.raises(ParameterError):
            binary_entropy(-1e-9)
        with pytest.raises(ParameterError):
            binary_entropy(1.0 + 1e-9)


class TestFluctuation:
    def test_vanishing_eps_term(self):
        assert qber_fluctuation(1.0 - 1e-12, 1) == pytest.approx(
            ZETA_LIMIT_M1, rel=1e-9)

    def test_frozen_value(self):
        assert qber_fluctuation(1e-5, 10_000) == pytest.approx(
            ZETA_1EM5_1E4, rel=1e-13)

    def test_monotone_grid(self):
        eps_grid = np.geomspace(1e-12, 0.9, 50)
        m_grid = np.unique(np.geomspace(1, 1e8, 50).astype(int))
        table = np.array([[qber_fluctuation(eps, int(m)) for m in m_grid]
                          for eps in eps_grid])
        assert (np.diff(table, axis=1) < 0).all()  # decreasing in m
        assert (np.diff(table, axis=0) < 0).all()  # decreasing in eps

    def test_quarter_sample_scaling(self):
        # Quadrupling the sample shrinks the penalty by nearly 1/2; the
        # log(m+1) term keeps it slightly above 1/sqrt(2) per doubling.
        for eps in (1e-10, 1e-5, 1e-2):
            for m in np.geomspace(1, 1e7, 30).astype(int):
                lhs = qber_fluctuation(eps, 4 * int(m))
                rhs = qber_fluctuation(eps, int(m)) / math.sqrt(2.0)
                assert lhs < rhs * 1.1

    def test_domain_errors(self):
        with pytest.raises(ParameterError):
            qber_fluctuation(0.0, 10)
        with pytest.raises(ParameterError):
            qber_fluctuation(1.0, 10)
        with pytest.raises(ParameterError):
            qber_fluctuation(1e-5, 0)


class TestWorstCaseQber:
    def test_zero_observed_gets_additive_penalty(self):
        zeta = qber_fluctuation(1e-7, 5000)
        worst = worst_case_qber(QberTriple.symmetric(0.0), 1e-7, 5000, 5000, 5000)
        for value in (worst.e_x, worst.e_y, worst.e_z):
            assert value == pytest.approx(2.0 * zeta, rel=1e-14)

    def test_infinite_sample_limit(self):
        observed = QberTriple(0.01, 0.02, 0.03)
        m = 10**15
        worst = worst_case_qber(observed, 1e-5, m, m, m)
        assert worst.e_x == pytest.approx(observed.e_x, abs=1e-6)
        assert worst.e_z == pytest.approx(observed.e_z, abs=1e-6)

    def test_cap_at_half(self):
        # 2*zeta(1e-5, 100) evaluates to 0.322, pushing 0.45 past the cap.
        assert 2.0 * qber_fluctuation(1e-5, 100) == pytest.approx(
            TWO_ZETA_1EM5_100, rel=1e-13)
        worst = worst_case_qber(QberTriple.symmetric(0.45), 1e-5, 100, 100, 100)
        assert worst == QberTriple.symmetric(0.5)

    @given(st.floats(min_value=0.0, max_value=0.5),
           st.floats(min_value=1e-12, max_value=0.999),
           st.integers(min_value=1, max_value=10**12))
    def test_bounded_below_and_above(self, e, eps, m):
        worst = worst_case_qber(QberTriple.symmetric(e), eps, m, m, m)
        assert worst.e_x >= e
        assert worst.e_x <= 0.5

    def test_triple_validation(self):
        with pytest.raises(ParameterError):
            QberTriple(0.6, 0.0, 0.0)
        with pytest.raises(ParameterError):
            QberTriple(-0.1, 0.0, 0.0)


class TestLeakEc:
    def test_error_free_and_maximal(self):
        assert leak_ec(1000, 0.0, 1.2) == 0.0
        assert leak_ec(0, 0.3, 1.5) == 0.0
        assert leak_ec(1000, 0.5, 1.0) == pytest.approx(1000.0, rel=1e-14)

    def test_frozen_value(self):
        assert leak_ec(1000, 0.05, 1.2) == pytest.approx(LEAK_1000_005_12, rel=1e-13)

    def test_inefficiency_below_one_rejected(self):
        with pytest.raises(ParameterError):
            leak_ec(1000, 0.05, 0.99)


class TestEntropyBound:
    def test_perfect_correlations_large_block(self):
        value = entropy_bound(QberTriple.symmetric(0.0), 10**18, 0.5)
        assert value == pytest.approx(1.0, abs=1e-8)

    def test_frozen_finite_value(self):
        value = entropy_bound(QberTriple.symmetric(0.0), 10**4, 1e-10)
        assert value == pytest.approx(S_ZERO_1E4_1EM10, rel=1e-13)

    def test_symmetric_reduction(self):
        # With equal error rates in all directions the closed form must
        # collapse to 1 - e - (1-e) h((1 - 3e/2)/(1-e)).
        for e in np.linspace(0.0, 0.12, 100):
            expected = (1.0 - e
                        - (1.0 - e) * binary_entropy((1.0 - 1.5 * e) / (1.0 - e))
                        if e > 0.0 else 1.0)
            got = conditional_entropy(QberTriple.symmetric(float(e)))
            assert got == pytest.approx(expected, abs=1e-10)

    def test_monotone_in_block_size(self):
        e = QberTriple.symmetric(0.03)
        values = [entropy_bound(e, n, 1e-9)
                  for n in (10, 100, 1000, 10**4, 10**6, 10**9)]
        assert values == sorted(values)

    def test_zero_ez_limit(self):
        flat = conditional_entropy(QberTriple(0.1, 0.1, 0.0))
        assert flat == pytest.approx(1.0 - binary_entropy(0.9), rel=1e-12)
        nearly = conditional_entropy(QberTriple(0.1, 0.1, 1e-13))
        assert nearly == pytest.approx(flat, abs=1e-12)

    def test_inconsistent_triple_raises(self):
        with pytest.raises(ParameterError):
            conditional_entropy(QberTriple(0.0, 0.0, 0.4))
        with pytest.raises(ParameterError):
            conditional_entropy(QberTriple(0.4, 0.0, 0.1))

    def test_finite_size_correction_domain(self):
        with pytest.raises(ParameterError):
            finite_size_correction(0, 1e-9)
        with pytest.raises(ParameterError):
            finite_size_correction(100, 1.0)
