"""
Unit Tests for Derivation Flows
Demonstrates: Leibniz-rule derivations, commuting flows, closed-form integration
Skills: pytest, fixtures, exact truncated series
"""

import pytest
import sys
import os
from fractions import Fraction

# Add src to path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../src')))

from nc_core import NCPoly, TruncSeries
from flows import (
    DeltaSpec,
    apply_delta,
    bracket_residual,
    catalan_C,
    catalan_R,
    check_intertwine,
    integrate_R,
    intertwine_sweep,
    intertwiner_Dt,
    is_log_one_minus_xy,
    quadratic_residual,
    random_bracket_suite,
    run_flow_checks,
    shuffle_c,
    strip_leading_x,
    verify_conjugation,
)

X = NCPoly.generator(1)
Y = NCPoly.generator(2)


class TestShuffles:
    """Test cases for the shuffle elements c_{n,m}."""

    def test_c11(self):
        """Test c_{1,1} = XY + YX."""
        assert shuffle_c(1, 1) == X * Y + Y * X

    def test_word_count(self):
        """Test c_{2,2} has C(4, 2) words."""
        assert len(shuffle_c(2, 2)) == 6

    def test_empty_index(self):
        """Test c_{0,0} is rejected."""
        with pytest.raises(ValueError):
            shuffle_c(0, 0)


class TestDeltaSpec:
    """Test cases for derivation specifications."""

    def test_terms_without_y_dropped(self):
        """Test f_{n,0} terms are set aside."""
        spec = DeltaSpec({(2, 0): 3, (1, 1): 1}, 4)
        assert spec.coefficients == {(1, 1): 1}
        assert spec.dropped == {(2, 0): 3}

    def test_from_text_log(self):
        """Test log(1 - x*y) gives f_{k,k} = -1/k."""
        spec = DeltaSpec.from_text("log(1 - x*y)", 6)
        assert spec.coefficients == {(1, 1): -1, (2, 2): Fraction(-1, 2), (3, 3): Fraction(-1, 3)}
        assert spec.to_dict()["2,2"] == "-1/2"

    def test_from_text_polynomial(self):
        """Test a polynomial is read as the generating series itself."""
        spec = DeltaSpec.from_text("x*y + 2*y", 4)
        assert spec.coefficients == {(1, 1): 1, (0, 1): 2}
        assert spec.element() == (X * Y + Y * X) + 2 * Y


class TestApplyDelta:
    """Test cases for the derivation action."""

    def test_delta11_on_x(self):
        """Test delta_{1,1}(X) = YXX - XXY."""
        assert apply_delta((1, 1), X) == Y * X * X - X * X * Y

    def test_y_is_constant(self):
        """Test delta(Y) = 0."""
        assert apply_delta((2, 1), Y).is_zero

    def test_leibniz(self):
        """Test delta(ab) = delta(a) b + a delta(b)."""
        a, b = X * Y + 2 * X, Y * X * X - Y
        assert apply_delta((1, 2), a * b) == apply_delta((1, 2), a) * b + a * apply_delta((1, 2), b)

    def test_truncation(self):
        """Test words beyond N are dropped."""
        assert apply_delta((1, 1), X * X, 3).is_zero

    def test_series_input(self):
        """Test a TruncSeries keeps its order."""
        image = apply_delta((0, 1), TruncSeries(X, 4))
        assert isinstance(image, TruncSeries)
        assert image.poly == Y * X - X * Y

    def test_inverse_letters_rejected(self):
        """Test derivations act on the monoid algebra."""
        with pytest.raises(ValueError):
            apply_delta((1, 1), X ** -1)


class TestCommutation:
    """Test cases for intertwining and commuting flows."""

    def test_intertwiner_degree(self):
        """Test D_t for (2, 1) has t-degree 2."""
        assert intertwiner_Dt(2, 1).degree == 2
        with pytest.raises(ValueError):
            intertwiner_Dt(2, 0)

    def test_intertwine_single(self):
        """Test the (1, 1) intertwining identity."""
        assert check_intertwine(1, 1).is_zero

    def test_intertwine_sweep(self):
        """Test every index up to total degree 5."""
        sweep = intertwine_sweep(5)
        assert len(sweep) == 15
        assert all(sweep.values())

    def test_bracket_on_x(self):
        """Test delta_{1,1} and delta_{0,2} commute on X."""
        assert bracket_residual((1, 1), (0, 2), X, 8).is_zero

    def test_random_brackets(self, seed):
        """Test seeded bracket cases all vanish."""
        suite = random_bracket_suite(seed, cases=10, N=8, max_index_degree=4)
        assert len(suite) == 10
        assert all(ok for *_, ok in suite)


class TestCatalanClosedForm:
    """Test cases for the Catalan solution."""

    def test_catalan_c6(self):
        """Test C to degree 6."""
        expected = X * Y + X * X * Y * Y + X * X * Y * X * Y * Y + X * X * X * Y * Y * Y
        assert catalan_C(6).poly == expected

    def test_catalan_needs_order_two(self):
        """Test N >= 2."""
        with pytest.raises(ValueError):
            catalan_C(1)

    def test_strip_leading_x(self):
        """Test X^-1 C has words starting with Y or X."""
        T = strip_leading_x(catalan_C(5))
        assert T.poly.coefficient((2,)) == 1
        with pytest.raises(ValueError):
            strip_leading_x(TruncSeries(Y, 3))

    def test_integrated_flow_matches_closed_form(self):
        """Test R(1) for delta = log(1 - x*y) equals 1 - YX - C."""
        spec = DeltaSpec.from_text("log(1 - x*y)", 6)
        assert integrate_R(spec, 6).evaluate(1) == catalan_R(6)

    def test_quadratic_residual(self):
        """Test X T^2 - T + Y = 0."""
        assert quadratic_residual(6).is_zero

    def test_conjugation(self):
        """Test the conjugation identity to order 6."""
        assert verify_conjugation(6).is_zero
        with pytest.raises(ValueError):
            verify_conjugation(3)


class TestFlowReport:
    """Test cases for the combined battery."""

    def test_default_battery_passes(self, seed):
        """Test the default delta at N = 6."""
        report = run_flow_checks(N=6, max_degree=4, seed=seed, bracket_cases=5)
        assert report.passed
        assert report.failures == []
        assert report.R_matches_closed_form

    def test_without_catalan(self):
        """Test the closed-form checks are skipped when not requested."""
        report = run_flow_checks(DeltaSpec.basis(1, 1, 5), N=5, max_degree=3, catalan=False, bracket_cases=3)
        assert report.R_matches_closed_form is None
        assert report.abelian_ok

    def test_abelian_check_one_minus_x_minus_y(self, seed):
        """Test the abelianized flow of log(1 - x - y) matches its binomial transform."""
        spec = DeltaSpec.from_text("log(1-x-y)", 6)
        report = run_flow_checks(spec, N=6, max_degree=4, catalan=False, seed=seed, bracket_cases=5)
        assert report.abelian_ok
        assert report.R_matches_closed_form is None
        assert report.passed

    def test_recognizes_rewritten_log(self):
        """Test the closed-form delta is matched up to sympy expansion."""
        assert is_log_one_minus_xy("log(1-x*y)")
        assert is_log_one_minus_xy("log(-x*y + 1)")
        assert is_log_one_minus_xy("log(1 - y*x)")
        assert not is_log_one_minus_xy("log(1-x-y)")
        assert not is_log_one_minus_xy("-x*y")


if __name__ == "__main__":
    pytest.main([__file__, "-v", "--tb=short"])
