"""
Unit Tests for Laurent Recovery
Demonstrates: word enumeration, ordered exact division, modular black-box interpolation
Skills: pytest, fixtures, seeded property checks, exact reconstruction
"""

import pytest
import sys
import os
import random
from fractions import Fraction

# Add src to path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../src')))

from nc_core import BudgetExceeded, NCPoly, reduce_word, word_mul
from ratexpr import ExprGraph, parse_expr
from dynamics import MapSpec, iterate_map
from laurent_recover import (
    LaurentCandidate,
    NotDivisible,
    RecoveryInfeasible,
    coefficient_set_check,
    divide_exact,
    enumerate_words,
    expand_laurent,
    leading_term,
    magnus_compare,
    magnus_key,
    recover_iterate,
    recover_laurent,
    recover_with_escalation,
    syntactic_degree,
    verify_candidate,
    word_count,
)

X = NCPoly.generator(1)
Y = NCPoly.generator(2)
ALPHABET = ("X", "Y")


def random_word(rng, length):
    return reduce_word(tuple(rng.choice([1, -1, 2, -2]) for _ in range(length)))


class TestWords:
    """Test cases for reduced word enumeration."""

    @pytest.mark.parametrize("n,L,count", [(2, 1, 5), (2, 2, 17), (1, 3, 7), (2, 3, 53)])
    def test_counts(self, n, L, count):
        """Test enumeration sizes against the closed count."""
        assert len(enumerate_words(n, L)) == count
        assert word_count(n, L) == count

    def test_words_are_reduced(self):
        """Test no enumerated word has a cancelling pair."""
        for word in enumerate_words(ALPHABET, 3):
            assert reduce_word(word) == word

    def test_monoid_words(self):
        """Test positive words only."""
        words = enumerate_words(2, 2, monoid=True)
        assert len(words) == 7
        assert all(letter > 0 for word in words for letter in word)

    def test_negative_bound(self):
        """Test L >= 0."""
        with pytest.raises(ValueError):
            enumerate_words(2, -1)


class TestMagnusOrder:
    """Test cases for the bi-invariant order."""

    def test_antisymmetric(self, seed):
        """Test compare(u, v) = -compare(v, u) on 100 random pairs."""
        rng = random.Random(seed)
        for _ in range(100):
            u, v = random_word(rng, 4), random_word(rng, 4)
            assert magnus_compare(u, v) == -magnus_compare(v, u)
            assert (magnus_compare(u, v) == 0) == (u == v)

    def test_bi_invariant(self, seed):
        """Test compare(a u b, a v b) = compare(u, v) on 100 random cases."""
        rng = random.Random(seed + 1)
        for _ in range(100):
            u, v, a, b = (random_word(rng, 3) for _ in range(4))
            assert magnus_compare(word_mul(word_mul(a, u), b), word_mul(word_mul(a, v), b)) == magnus_compare(u, v)

    def test_leading_term_of_product(self, seed):
        """Test lead(pq) = lead(p) lead(q) on 50 random pairs."""
        rng = random.Random(seed + 2)
        for _ in range(50):
            p = NCPoly({random_word(rng, 3): rng.randint(1, 3) for _ in range(3)})
            q = NCPoly({random_word(rng, 3): rng.randint(1, 3) for _ in range(3)})
            (wp, cp), (wq, cq) = leading_term(p), leading_term(q)
            assert leading_term(p * q) == (word_mul(wp, wq), cp * cq)

    def test_magnus_key(self):
        """Test X Y^-1 -> 1 + a1 - a2 - a1 a2 + a2^2 to depth 2."""
        assert magnus_key((1, -2), 2) == (((), 1), ((1,), 1), ((2,), -1), ((1, 2), -1), ((2, 2), 1))

    def test_zero_has_no_leading_term(self):
        """Test the zero element is rejected."""
        with pytest.raises(ValueError):
            leading_term(NCPoly.zero())


class TestDivision:
    """Test cases for exact division."""

    def test_right_and_left(self):
        """Test both sides recover the cofactor."""
        p, q = 1 + X, X ** -1 + 2 * Y
        product = p * q
        assert divide_exact(product, q, "right") == p
        assert divide_exact(product, p, "left") == q

    def test_random_products(self, seed):
        """Test (p q) / q = p on 30 random pairs."""
        rng = random.Random(seed + 3)
        for _ in range(30):
            p = NCPoly({random_word(rng, 2): rng.randint(-2, 2) or 1 for _ in range(3)})
            q = NCPoly({random_word(rng, 2): rng.randint(-2, 2) or 1 for _ in range(2)})
            assert divide_exact(p * q, q) == p

    def test_not_divisible(self):
        """Test a remainder is reported."""
        with pytest.raises((NotDivisible, BudgetExceeded)):
            divide_exact(1 + Y, 1 + X, max_steps=50)

    def test_bad_arguments(self):
        """Test zero divisors and unknown sides."""
        with pytest.raises(ZeroDivisionError):
            divide_exact(X, NCPoly.zero())
        with pytest.raises(ValueError):
            divide_exact(X, X, "middle")


class TestExpansion:
    """Test cases for exact Laurent expansion of expressions."""

    @pytest.fixture
    def graph(self):
        return ExprGraph()

    def test_monomial_inverses(self, graph):
        """Test (XY)^-1 expands to Y^-1 X^-1."""
        assert expand_laurent(parse_expr("(X*Y)^-1", graph), ALPHABET) == Y ** -1 * X ** -1

    def test_absorbed_inverse(self, graph):
        """Test (X + XY)(1 + Y)^-1 = X."""
        assert expand_laurent(parse_expr("(X + X*Y)*(1 + Y)^-1", graph), ALPHABET) == X

    def test_unresolved_inverse(self, graph):
        """Test (1 + X)^-1 alone is not Laurent."""
        with pytest.raises(NotDivisible):
            expand_laurent(parse_expr("(1 + X)^-1", graph), ALPHABET)
        with pytest.raises(NotDivisible):
            expand_laurent(parse_expr("Y + (1 + X)^-1", graph), ALPHABET)

    def test_term_budget(self, graph):
        """Test the expansion stops at max_terms."""
        with pytest.raises(BudgetExceeded):
            expand_laurent(parse_expr("(X + Y + X^-1)^4", graph), ALPHABET, max_terms=20)

    def test_s1_iterates_satisfy_recursion(self, graph):
        """Test expanded S1 iterates satisfy X' X = X Y and Y' X = 1 + Y."""
        states = iterate_map(MapSpec.parse("S1"), 3, graph)
        expanded = [tuple(expand_laurent(c, ALPHABET) for c in state) for state in states]
        for (x, y), (x_next, y_next) in zip(expanded, expanded[1:]):
            assert x_next * x == x * y
            assert y_next * x == 1 + y


class TestRecovery:
    """Test cases for black-box recovery."""

    @pytest.fixture
    def graph(self):
        return ExprGraph()

    def test_known_polynomial(self, graph):
        """Test recovery of X Y^-1 + 2Y - X^-1 at L = 2."""
        target = parse_expr("X*Y^-1 + 2*Y - X^-1", graph)
        candidate = recover_laurent(target, ALPHABET, 2, seed=1)
        assert candidate.coefficients == {(1, -2): 1, (2,): 2, (-1,): -1}
        assert candidate.verified
        assert candidate.min_full_rank_d in (2, 3)
        assert candidate.report["all_zero"]

    def test_unique_across_seeds(self, graph):
        """Test disjoint seeds recover the same candidate."""
        target = parse_expr("X*Y*X^-1 + Y^-1", graph)
        first = recover_laurent(target, ALPHABET, 3, seed=1)
        second = recover_laurent(target, ALPHABET, 3, seed=2)
        assert first.coefficients == second.coefficients

    def test_rational_coefficients(self, graph):
        """Test non-integer coefficients come back exactly."""
        target = parse_expr("1/3*X - 5/2", graph)
        candidate = recover_laurent(target, ALPHABET, 1, seed=4)
        assert candidate.coefficients == {(1,): Fraction(1, 3), (): Fraction(-5, 2)}
        assert not coefficient_set_check(candidate, {"ZZ"})[0]

    def test_non_laurent_target(self, graph):
        """Test a genuinely rational target is infeasible."""
        with pytest.raises(RecoveryInfeasible):
            recover_laurent(parse_expr("(1 + X)^-1", graph), ALPHABET, 2, seed=5)

    def test_word_budget(self, graph):
        """Test too many candidate words raises."""
        with pytest.raises(BudgetExceeded):
            recover_laurent(parse_expr("X", graph), ALPHABET, 3, max_words=10)

    def test_escalation(self, graph):
        """Test L is raised from 0 until the system is consistent."""
        candidate = recover_with_escalation(parse_expr("X*Y", graph), ALPHABET, L=0, seed=6)
        assert candidate.L == 2
        assert candidate.coefficients == {(1, 2): 1}

    def test_syntactic_degree(self, graph):
        """Test products add degrees and sums take the maximum."""
        assert syntactic_degree(parse_expr("X*Y^-1 + X", graph)) == 2
        assert syntactic_degree(parse_expr("3", graph)) == 0

    def test_verify_detects_wrong_candidate(self, graph):
        """Test a wrong candidate fails fresh verification."""
        report = verify_candidate(parse_expr("X*Y", graph), Y * X, ALPHABET, [2], seed=7)
        assert not report["all_zero"]

    def test_iterate_recovery(self, graph):
        """Test the second S1 iterate is recovered with 0/1 coefficients."""
        state = iterate_map(MapSpec.parse("S1"), 2, graph)[2]
        candidate = recover_iterate(state[1], ALPHABET, seed=8)
        assert candidate.verified
        assert len(candidate.coefficients) == 3
        assert coefficient_set_check(candidate, {0, 1}) == (True, [])

    def test_explicit_primes_reach_the_solver(self, graph, monkeypatch):
        """Test primes passed in win over NCID_PRIMES."""
        monkeypatch.setenv("NCID_PRIMES", "2147483647,2147483629")
        primes = [1000003, 998244353]
        state = iterate_map(MapSpec.parse("S1"), 2, graph)[2]
        candidate = recover_iterate(state[1], ALPHABET, seed=8, primes=primes)
        assert candidate.verified
        assert candidate.report["primes"] == primes
        escalated = recover_with_escalation(parse_expr("X*Y", graph), ALPHABET, L=0, seed=6, primes=primes)
        assert escalated.report["primes"] == primes


class TestCandidate:
    """Test cases for candidate reporting."""

    def test_to_dict(self):
        """Test support text and coefficient-set summary."""
        candidate = LaurentCandidate(ALPHABET, 2, {(1, -2): Fraction(1), (): Fraction(1, 2)},
                                     verified=True, target_hash="abc")
        data = candidate.to_dict({"ZZ"})
        assert data["support"] == [["1", "1/2"], ["X*Y^-1", "1"]]
        assert data["coefficient_set"] == {"allowed": ["ZZ"], "ok": False}
        assert candidate.max_length == 2

    def test_offenders_listed(self):
        """Test offending words are reported."""
        candidate = LaurentCandidate(ALPHABET, 1, {(1,): Fraction(2), (2,): Fraction(1)})
        ok, offenders = coefficient_set_check(candidate, {0, 1})
        assert not ok
        assert offenders == [((1,), Fraction(2))]


if __name__ == "__main__":
    pytest.main([__file__, "-v", "--tb=short"])
