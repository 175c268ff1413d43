"""
Unit Tests for Annihilator Guessing and the Binomial Transform
Demonstrates: exact nullspace search, held-out verification, series transforms
Skills: pytest, parametrization, sympy comparison
"""

import pytest
import sys
import os
import random
from fractions import Fraction
from math import comb

import sympy

# Add src to path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../src')))

from nc_core import ScalarSeries
from guessing import (
    FAMILY_EXPECTATIONS,
    AnnihilatorPoly,
    InsufficientCoefficients,
    binomial_slice,
    binomial_transform,
    binomial_weight,
    compress_series,
    guess_annihilator,
    guess_family_evidence,
    log_coefficients,
    normalize_annihilator,
    random_transform_polynomial,
    slice_evidence,
    transform_battery,
    verify_annihilator,
)


def catalan_series(order):
    return ScalarSeries.from_list([comb(2 * n, n) // (n + 1) for n in range(order + 1)], "t", order)


class TestGuessAnnihilator:
    """Test cases for the exact annihilator search."""

    def test_catalan(self):
        """Test the Catalan series gives t*S^2 - S + 1."""
        Q = guess_annihilator(catalan_series(13), 2, 2, margin=5)
        assert Q is not None
        assert Q.verified
        assert (Q.deg_s, Q.deg_t) == (2, 1)
        t, S = sympy.symbols("t S")
        assert sympy.expand(Q.to_sympy() - (t * S ** 2 - S + 1)) == 0

    def test_geometric_series_is_rational(self):
        """Test 1/(1 - t) is found at S-degree 1."""
        s = ScalarSeries.from_list([1] * 12, "t", 11)
        Q = guess_annihilator(s, 2, 2, margin=5)
        assert Q.deg_s == 1
        assert Q.integer_coefficients == {(0, 1): 1, (1, 1): -1, (0, 0): -1}

    def test_insufficient_coefficients(self):
        """Test the margin is enforced before searching."""
        with pytest.raises(InsufficientCoefficients) as excinfo:
            guess_annihilator(catalan_series(10), 2, 2, margin=5)
        assert excinfo.value.needed == 14
        assert excinfo.value.have == 11

    def test_none_when_bounds_too_small(self):
        """Test a non-rational series has no S-degree 1 annihilator."""
        assert guess_annihilator(catalan_series(20), 3, 1, margin=5) is None

    def test_univariate_required(self):
        """Test bivariate input is rejected."""
        with pytest.raises(ValueError):
            guess_annihilator(ScalarSeries.from_sympy("1 + x*y", 30), 2, 2)


class TestVerify:
    """Test cases for annihilator substitution."""

    def test_first_nonzero_order(self):
        """Test S - 1 - t fails on the geometric series at t^2."""
        Q = AnnihilatorPoly({(0, 1): Fraction(1), (0, 0): Fraction(-1), (1, 0): Fraction(-1)},
                            {(0, 1): 1, (0, 0): -1, (1, 0): -1}, deg_t=1, deg_s=1, margin=0)
        report = verify_annihilator(Q, ScalarSeries.from_list([1] * 6, "t", 5), 5)
        assert not report.zero
        assert report.first_nonzero == 2

    def test_normalize(self):
        """Test the leading S term is scaled to 1."""
        normalized = normalize_annihilator({(1, 2): Fraction(-2), (0, 1): Fraction(4)})
        assert normalized == {(1, 2): 1, (0, 1): -2}

    def test_normalize_zero(self):
        """Test the zero vector is rejected."""
        with pytest.raises(ValueError):
            normalize_annihilator({(0, 0): Fraction(0)})


class TestBinomialTransform:
    """Test cases for the log, weight and exp pipeline."""

    def test_log_of_one_minus_xy(self):
        """Test log(1 - xy) = -xy - x^2y^2/2 - ..."""
        L = log_coefficients("1 - x*y", 6)
        assert L.coefficient(1, 1) == -1
        assert L.coefficient(2, 2) == Fraction(-1, 2)
        assert L.coefficient(3, 3) == Fraction(-1, 3)
        assert L.coefficient(1, 0) == 0

    def test_log_needs_constant_one(self):
        """Test P(0, 0) = 1 is required."""
        with pytest.raises(ValueError):
            log_coefficients("2 - x", 4)

    def test_rational_input_rejected(self):
        """Test only polynomial inputs are accepted."""
        with pytest.raises(ValueError):
            log_coefficients("1/(1 - x*y)", 4)

    def test_weight(self):
        """Test f_{n,m} is scaled by C(n+m, n)."""
        weighted = binomial_weight(log_coefficients("1 - x*y", 4))
        assert weighted.coefficient(1, 1) == -2
        assert weighted.coefficient(2, 2) == -3

    def test_diagonal_slice(self):
        """Test the 1 - xy slice starts 1 - 2t^2 - t^4."""
        assert binomial_slice("1 - x*y", 4).coefficients() == [1, 0, -2, 0, -1]

    def test_single_variable_unchanged(self):
        """Test polynomials in x alone are fixed by the transform."""
        image = binomial_transform("1 - 3*x + 2*x**2", 8)
        expected = ScalarSeries.from_sympy("1 - 3*x + 2*x**2", 8)
        assert image.agrees_with(expected, 8)

    def test_compress(self):
        """Test compression picks the gcd of exponents."""
        s = ScalarSeries.from_list([1, 0, 0, 2, 0, 0, 5], "t", 6)
        compressed, step = compress_series(s)
        assert step == 3
        assert compressed.coefficients() == [1, 2, 5]
        assert compress_series(catalan_series(4))[1] == 1


class TestEvidence:
    """Test cases for the evidence batteries."""

    def test_one_minus_xy_anchor(self):
        """Test the diagonal slice of 1 - xy gives S^2 + (2z - 1)S + z^2."""
        entry = slice_evidence("1 - x*y", "1 - x*y")
        assert entry.verified
        assert entry.step == 2
        z, S = sympy.symbols("z S")
        assert sympy.expand(entry.annihilator.to_sympy() - (S ** 2 + (2 * z - 1) * S + z ** 2)) == 0
        assert entry.to_dict()["bounds"] == {"degT": 8, "degS": 4}

    def test_family_plus_inverses_one(self):
        """Test X + X^-1 gives S^2 - S + z."""
        entry = guess_family_evidence("plus-inverses-1")
        assert entry.verified
        assert entry.matches_expected

    @pytest.mark.slow
    @pytest.mark.parametrize("name", ["plus-inverses-2", "product-inverse-2"])
    def test_family_expectations(self, name):
        """Test the two-variable families against their recorded annihilators."""
        entry = guess_family_evidence(name)
        assert entry.matches_expected
        assert entry.step == FAMILY_EXPECTATIONS[name][3]

    @pytest.mark.slow
    def test_battery_records_every_case(self, seed):
        """Test the battery keeps unresolved cases as not-found entries."""
        entries = transform_battery(seed, count=5)
        assert len(entries) == 6
        assert entries[0].matches_expected
        assert entries[0].to_dict()["bounds"] == {"degT": 8, "degS": 8}
        for entry in entries:
            assert entry.status in ("verified", "not-found")
            assert entry.to_dict()["status"] == entry.status
            assert entry.verified == (entry.status == "verified")


class TestRandomTransformPolynomial:
    """Test cases for the battery's polynomial sampler."""

    def test_shape(self):
        """Test draws have constant term 1 and total degree at most 3."""
        x, y = sympy.symbols("x y")
        rng = random.Random(0)
        for _ in range(50):
            P = sympy.Poly(random_transform_polynomial(rng), x, y)
            assert P.coeff_monomial(1) == 1
            assert 1 <= P.total_degree() <= 3
            assert all(abs(c) <= 2 for c in P.coeffs())

    def test_irreducible_cubics_drawn(self):
        """Test the sampler reaches irreducible cubics, not just products of lines."""
        x, y = sympy.symbols("x y")
        rng = random.Random(0)
        cubics = []
        for _ in range(200):
            P = random_transform_polynomial(rng)
            if sympy.Poly(P, x, y).total_degree() == 3:
                factors = sympy.factor_list(P)[1]
                if len(factors) == 1 and factors[0][1] == 1:
                    cubics.append(P)
        assert cubics

    def test_general_quadratic_verifies(self):
        """Test a quadratic that is not a product of linear forms."""
        entry = slice_evidence("1 - x + 2*y + x*y - 2*y**2", "quadratic")
        assert entry.status == "verified"
        assert (entry.annihilator.deg_t, entry.annihilator.deg_s) == (6, 3)

    @pytest.mark.slow
    def test_cubic_recorded_not_found(self):
        """Test 1 - xy + x^2 y has no annihilator with degT, degS <= 8."""
        entry = slice_evidence("1 - x*y + x**2*y", "cubic", max_deg_t=8, max_deg_s=8)
        assert entry.annihilator is None
        assert entry.status == "not-found"
        data = entry.to_dict()
        assert data["verified"] is False
        assert data["bounds"] == {"degT": 8, "degS": 8}


if __name__ == "__main__":
    pytest.main([__file__, "-v", "--tb=short"])
