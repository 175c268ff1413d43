"""
Unit Tests for Noncommutative Core Arithmetic
Demonstrates: exact arithmetic, algebraic invariants, randomized property checks
Skills: pytest, fixtures, seeded property testing, sympy interop
"""

import pytest
import sys
import os
import random
from fractions import Fraction

import sympy

# Add src to path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../src')))

from nc_core import (
    BudgetExceeded,
    CentralPoly,
    NCPoly,
    ScalarSeries,
    TruncSeries,
    abelianize,
    format_word,
    reduce_word,
    scalar_series_exp_log,
    series_inverse,
    to_fraction,
    trace_const,
    trace_of_product,
    word_inverse,
    word_mul,
)

X = NCPoly.generator(1)
Y = NCPoly.generator(2)


def random_poly(rng, n=2, max_terms=4, max_length=3, monoid=False):
    letters = list(range(1, n + 1)) if monoid else [l for i in range(1, n + 1) for l in (i, -i)]
    terms = {}
    for _ in range(rng.randint(1, max_terms)):
        word = tuple(rng.choice(letters) for _ in range(rng.randint(0, max_length)))
        terms[word] = Fraction(rng.randint(-5, 5), rng.randint(1, 3))
    return NCPoly(terms)


class TestWords:
    """Test cases for free group words."""

    def test_reduce_cancels_adjacent_pairs(self):
        """Test free reduction removes x x^-1 pairs recursively."""
        assert reduce_word((1, 2, -2, -1, 2)) == (2,)
        assert reduce_word([(1, 1), (1, -1)]) == ()

    def test_reduce_rejects_letter_zero(self):
        """Test that index 0 is not a letter."""
        with pytest.raises(ValueError):
            reduce_word((1, 0))

    def test_word_mul_cancels_at_junction(self):
        """Test product of a word with its inverse is the identity."""
        word = (1, -2, 1)
        assert word_mul(word, word_inverse(word)) == ()
        assert word_mul((1, 2), (-2, 1)) == (1, 1)

    def test_format_word(self):
        """Test canonical text form."""
        assert format_word((1, -2), ("X", "Y")) == "X*Y^-1"
        assert format_word(()) == "1"


class TestNCPoly:
    """Test cases for group ring elements."""

    def test_inverse_generator_cancels(self):
        """Test X * X^-1 = 1."""
        assert X * X ** -1 == NCPoly.one()

    def test_square_is_noncommutative(self):
        """Test (X + Y)^2 keeps XY and YX apart."""
        square = (X + Y) ** 2
        assert len(square) == 4
        assert square.coefficient((1, 2)) == 1
        assert square.coefficient((2, 1)) == 1

    def test_non_monomial_has_no_inverse(self):
        """Test only monomials are invertible in the group ring."""
        with pytest.raises(ValueError):
            (1 + X) ** -1

    def test_zero_coefficients_are_dropped(self):
        """Test cancellation leaves no stored zeros."""
        assert (X - X).is_zero
        assert NCPoly({(1,): 0}).is_zero

    def test_scalar_domain(self):
        """Test ZZ/QQ promotion."""
        assert (X + 2 * Y).scalar_domain == "ZZ"
        assert (X + Fraction(1, 2) * Y).scalar_domain == "QQ"

    def test_trace_of_square(self):
        """Test Tr((X + X^-1)^2) = 2."""
        a = X + X ** -1
        assert trace_const(a * a) == 2
        assert trace_of_product(a, a) == 2

    def test_to_text(self):
        """Test text rendering in length-lex order."""
        assert (X - 2 * Y ** -1 + 3).to_text() == "3 + X - 2*Y^-1"

    def test_to_fraction_accepts_sympy(self):
        """Test conversion from sympy rationals."""
        assert to_fraction(sympy.Rational(3, 4)) == Fraction(3, 4)


class TestAlgebraicProperties:
    """Seeded randomized checks of ring axioms and trace identities."""

    def test_associativity(self, seed):
        """Test (ab)c = a(bc) on 300 random triples."""
        rng = random.Random(seed)
        for _ in range(300):
            a, b, c = (random_poly(rng) for _ in range(3))
            assert (a * b) * c == a * (b * c)

    def test_distributivity(self, seed):
        """Test a(b + c) = ab + ac on 100 random triples."""
        rng = random.Random(seed + 1)
        for _ in range(100):
            a, b, c = (random_poly(rng) for _ in range(3))
            assert a * (b + c) == a * b + a * c

    def test_trace_cyclicity(self, seed):
        """Test Tr(ab) = Tr(ba) on 300 random pairs."""
        rng = random.Random(seed + 2)
        for _ in range(300):
            a, b = random_poly(rng), random_poly(rng)
            assert trace_const(a * b) == trace_const(b * a)
            assert trace_of_product(a, b) == trace_const(a * b)

    def test_abelianization_is_multiplicative(self, seed):
        """Test ab(a b) = ab(a) ab(b) on 150 random pairs."""
        rng = random.Random(seed + 3)
        for _ in range(150):
            a, b = random_poly(rng, max_terms=3, max_length=2), random_poly(rng, max_terms=3, max_length=2)
            lhs = abelianize(a * b, ("X", "Y"))
            rhs = sympy.expand(abelianize(a, ("X", "Y")) * abelianize(b, ("X", "Y")))
            assert sympy.expand(lhs - rhs) == 0

    def test_series_inverse(self, seed):
        """Test s * s^-1 = s^-1 * s = 1 on 100 random series."""
        rng = random.Random(seed + 4)
        for _ in range(100):
            body = random_poly(rng, monoid=True, max_length=3)
            s = TruncSeries(body - body.coefficient(()) + Fraction(rng.choice([1, 2, -3])), 4)
            inverse = series_inverse(s)
            assert s * inverse == TruncSeries.one(4)
            assert inverse * s == TruncSeries.one(4)


class TestTruncSeries:
    """Test cases for truncated free-algebra series."""

    def test_geometric_inverse(self):
        """Test (1 - X)^-1 = 1 + X + X^2 + ... to the order."""
        inverse = TruncSeries(1 - X, 5).inverse()
        for k in range(6):
            assert inverse.part(k) == X ** k

    def test_truncation_drops_long_words(self):
        """Test words beyond the order are dropped."""
        s = TruncSeries(X ** 3 + Y, 2)
        assert s.poly == Y

    def test_inverse_letters_rejected(self):
        """Test series live in the monoid algebra."""
        with pytest.raises(ValueError):
            TruncSeries(X ** -1, 3)

    def test_zero_constant_not_invertible(self):
        """Test inversion needs a nonzero constant term."""
        with pytest.raises(ValueError):
            TruncSeries(X, 3).inverse()

    def test_abelianize_series(self):
        """Test abelianization of 1 - X Y is 1 - x y."""
        image = abelianize(TruncSeries(1 - X * Y, 4), ("X", "Y"))
        assert image.variables == ("x", "y")
        assert image.coefficient(1, 1) == -1
        assert image.constant_term == 1


class TestCentralPoly:
    """Test cases for polynomials in a central variable."""

    def test_evaluate(self):
        """Test evaluation at a rational value."""
        p = CentralPoly([NCPoly.one(), X, Y])
        assert p.evaluate(2) == 1 + 2 * X + 4 * Y

    def test_trailing_zeros_stripped(self):
        """Test degree ignores zero leading coefficients."""
        p = CentralPoly([X, NCPoly.zero()])
        assert p.degree == 0
        assert (p - p).is_zero


class TestScalarSeries:
    """Test cases for commutative scalar series."""

    def test_sqrt_catalan(self):
        """Test sqrt(1 - 4t) = 1 - 2t - 2t^2 - 4t^3 - 10t^4."""
        s = ScalarSeries.from_list([1, -4], "t", 4).sqrt()
        assert s.coefficients() == [1, -2, -2, -4, -10]

    def test_exp_log_inverse_pair(self):
        """Test exp(log(1 - t)) = 1 - t."""
        s = ScalarSeries.from_list([1, -1], "t", 8)
        assert scalar_series_exp_log(scalar_series_exp_log(s, "log"), "exp") == s

    def test_log_needs_unit_constant(self):
        """Test log rejects a constant term other than 1."""
        with pytest.raises(ValueError):
            ScalarSeries.from_list([2, 1], "t", 4).log()

    def test_compress(self):
        """Test z = t^2 substitution."""
        s = ScalarSeries.from_list([1, 0, -1, 0, -1], "t", 4)
        assert s.compress(2).coefficients() == [1, -1, -1]
        with pytest.raises(ValueError):
            ScalarSeries.from_list([1, 1], "t", 4).compress(2)

    def test_restrict_line(self):
        """Test x = t, y = 2t on 1 + x y."""
        s = ScalarSeries.from_sympy("1 + x*y", 4)
        assert s.restrict_line(2).coefficients() == [1, 0, 2, 0, 0]

    def test_inverse(self):
        """Test 1/(1 - t) coefficients are all ones."""
        s = ScalarSeries.from_list([1, -1], "t", 6).inverse()
        assert s.coefficients() == [1] * 7


class TestErrors:
    """Test cases for domain errors."""

    def test_budget_exceeded_message(self):
        """Test budget errors name the limit."""
        error = BudgetExceeded("terms", 10)
        assert error.limit == 10
        assert "terms" in str(error)


if __name__ == "__main__":
    pytest.main([__file__, "-v", "--tb=short"])
