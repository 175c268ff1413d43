"""
Noncommutative Core Arithmetic

Exact arithmetic on free group words, group ring elements, truncated series
in the free algebra, polynomials in a central variable and commutative
scalar series. Every other ncid module is built on these types.

Words are tuples of signed generator indices: +i is X_i and -i is X_i^-1.
Coefficients are exact rationals (fractions.Fraction); commutative series
are delegated to sympy's sparse ring series.
"""

import logging
from fractions import Fraction
from functools import lru_cache
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import sympy
from sympy.polys.domains import QQ
from sympy.polys.rings import ring
from sympy.polys.ring_series import (
    rs_exp,
    rs_log,
    rs_mul,
    rs_nth_root,
    rs_series_inversion,
)

logger = logging.getLogger(__name__)

Word = Tuple[int, ...]
Letter = Union[int, Tuple[int, int]]

DEFAULT_ORDER = 12
DEFAULT_NAMES = ("X", "Y", "Z", "W")


class NcidError(Exception):
    """Base class for all ncid domain errors."""


class BudgetExceeded(NcidError):
    """Raised when an enumeration or expansion outgrows its configured budget."""

    def __init__(self, what: str, limit: int):
        super().__init__(f"{what} exceeded budget of {limit}")
        self.what = what
        self.limit = limit


def to_fraction(value) -> Fraction:
    """Convert ints, strings, Fractions, sympy rationals and ground-domain
    elements (gmpy2 / python mpq) to a Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, str)):
        return Fraction(value)
    if isinstance(value, sympy.Rational):
        return Fraction(int(value.p), int(value.q))
    numerator = getattr(value, "numerator", None)
    denominator = getattr(value, "denominator", None)
    if numerator is not None and denominator is not None:
        if callable(numerator):
            numerator, denominator = numerator(), denominator()
        return Fraction(int(numerator), int(denominator))
    return Fraction(int(value))


def generator_names(count: int, prefix: Optional[str] = None) -> Tuple[str, ...]:
    """Default display names for `count` generators (X, Y, Z, W, then X1..Xn)."""
    if prefix is not None:
        return tuple(f"{prefix}{i}" for i in range(1, count + 1))
    if count <= len(DEFAULT_NAMES):
        return DEFAULT_NAMES[:count]
    return tuple(f"X{i}" for i in range(1, count + 1))


# ---------------------------------------------------------------------------
# Words
# ---------------------------------------------------------------------------

def reduce_word(raw: Iterable[Letter]) -> Word:
    """
    Free-group normal form.

    Args:
        raw: signed letters, either ints (+i / -i) or (index, exponent) pairs
             with exponent +1 or -1

    Returns:
        Fully reduced word (no adjacent x x^-1 pair)
    """
    stack: List[int] = []
    for letter in raw:
        if isinstance(letter, tuple):
            index, exponent = letter
            if index < 1 or exponent not in (1, -1):
                raise ValueError(f"Invalid letter {letter!r}")
            letter = index if exponent == 1 else -index
        elif letter == 0:
            raise ValueError("Generator index 0 is not a letter")
        if stack and stack[-1] == -letter:
            stack.pop()
        else:
            stack.append(letter)
    return tuple(stack)


def word_inverse(word: Word) -> Word:
    """Formal inverse: reverse and flip every exponent."""
    return tuple(-letter for letter in reversed(word))


def word_mul(u: Word, v: Word) -> Word:
    """Product of two reduced words; cancellation only happens at the junction."""
    cancel = 0
    limit = min(len(u), len(v))
    while cancel < limit and u[len(u) - 1 - cancel] == -v[cancel]:
        cancel += 1
    return u[:len(u) - cancel] + v[cancel:]


def letter_key(letter: int) -> int:
    """Letter order X1 < X1^-1 < X2 < X2^-1 < ..."""
    return 2 * (abs(letter) - 1) + (0 if letter > 0 else 1)


def word_key(word: Word) -> Tuple[int, Tuple[int, ...]]:
    """Length-lexicographic sort key."""
    return (len(word), tuple(letter_key(letter) for letter in word))


def is_monoid_word(word: Word) -> bool:
    return all(letter > 0 for letter in word)


def format_word(word: Word, names: Sequence[str] = DEFAULT_NAMES) -> str:
    """Canonical text form, e.g. ``X*Y^-1*X``; the empty word prints as ``1``."""
    if not word:
        return "1"
    parts = []
    for letter in word:
        name = names[abs(letter) - 1]
        parts.append(name if letter > 0 else f"{name}^-1")
    return "*".join(parts)


def format_scalar(value: Fraction) -> str:
    return str(value.numerator) if value.denominator == 1 else f"{value.numerator}/{value.denominator}"


# ---------------------------------------------------------------------------
# Group ring elements
# ---------------------------------------------------------------------------

class NCPoly:
    """
    Element of Q<X_i^{+-1}>: a finite map from reduced words to exact
    rationals, with no stored zero coefficients. Treated as immutable.
    """

    __slots__ = ("_terms",)

    def __init__(self, terms: Optional[Mapping] = None):
        collected: Dict[Word, Fraction] = {}
        for raw, coef in (terms or {}).items():
            value = to_fraction(coef)
            if not value:
                continue
            word = reduce_word(raw)
            total = collected.get(word, 0) + value
            if total:
                collected[word] = total
            else:
                collected.pop(word, None)
        self._terms = collected

    @classmethod
    def _from_reduced(cls, terms: Dict[Word, Fraction]) -> "NCPoly":
        poly = cls.__new__(cls)
        poly._terms = terms
        return poly

    @classmethod
    def zero(cls) -> "NCPoly":
        return cls._from_reduced({})

    @classmethod
    def constant(cls, value) -> "NCPoly":
        value = to_fraction(value)
        return cls._from_reduced({(): value} if value else {})

    @classmethod
    def one(cls) -> "NCPoly":
        return cls.constant(1)

    @classmethod
    def word(cls, word: Iterable[Letter], coef=1) -> "NCPoly":
        return cls({tuple(word): coef})

    @classmethod
    def generator(cls, index: int, exponent: int = 1) -> "NCPoly":
        return cls.word((index,) * exponent if exponent >= 0 else (-index,) * (-exponent))

    # -- inspection -------------------------------------------------------

    def items(self) -> List[Tuple[Word, Fraction]]:
        """Terms in length-lexicographic word order."""
        return sorted(self._terms.items(), key=lambda item: word_key(item[0]))

    def support(self) -> List[Word]:
        return [word for word, _ in self.items()]

    def coefficient(self, word: Word) -> Fraction:
        return self._terms.get(tuple(word), Fraction(0))

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self):
        return iter(self._terms)

    @property
    def is_zero(self) -> bool:
        return not self._terms

    @property
    def degree(self) -> int:
        """Maximum word length over the support; -1 for the zero element."""
        return max((len(word) for word in self._terms), default=-1)

    @property
    def scalar_domain(self) -> str:
        return "ZZ" if all(c.denominator == 1 for c in self._terms.values()) else "QQ"

    @property
    def is_monoid(self) -> bool:
        return all(is_monoid_word(word) for word in self._terms)

    @property
    def is_monomial(self) -> bool:
        return len(self._terms) == 1

    def num_generators(self) -> int:
        return max((abs(letter) for word in self._terms for letter in word), default=0)

    # -- arithmetic -------------------------------------------------------

    def __add__(self, other) -> "NCPoly":
        if not isinstance(other, NCPoly):
            try:
                other = NCPoly.constant(other)
            except (TypeError, ValueError):
                return NotImplemented
        out = dict(self._terms)
        for word, coef in other._terms.items():
            total = out.get(word, 0) + coef
            if total:
                out[word] = total
            else:
                out.pop(word, None)
        return NCPoly._from_reduced(out)

    __radd__ = __add__

    def __neg__(self) -> "NCPoly":
        return NCPoly._from_reduced({word: -coef for word, coef in self._terms.items()})

    def __sub__(self, other) -> "NCPoly":
        if not isinstance(other, NCPoly):
            try:
                other = NCPoly.constant(other)
            except (TypeError, ValueError):
                return NotImplemented
        return self + (-other)

    def __rsub__(self, other) -> "NCPoly":
        return (-self) + other

    def scale(self, value) -> "NCPoly":
        value = to_fraction(value)
        if not value:
            return NCPoly.zero()
        return NCPoly._from_reduced({word: coef * value for word, coef in self._terms.items()})

    def __mul__(self, other):
        if isinstance(other, NCPoly):
            return poly_mul(self, other)
        if isinstance(other, (TruncSeries, CentralPoly)):
            return NotImplemented
        try:
            return self.scale(other)
        except (TypeError, ValueError):
            return NotImplemented

    def __rmul__(self, other):
        try:
            return self.scale(other)
        except (TypeError, ValueError):
            return NotImplemented

    def __pow__(self, exponent: int) -> "NCPoly":
        if exponent < 0:
            if not self.is_monomial:
                raise ValueError("Only monomials have inverses in the group ring")
            (word, coef), = self._terms.items()
            return NCPoly._from_reduced({word_inverse(word): 1 / coef}) ** (-exponent)
        result = NCPoly.one()
        for _ in range(exponent):
            result = poly_mul(result, self)
        return result

    def __eq__(self, other) -> bool:
        if isinstance(other, NCPoly):
            return self._terms == other._terms
        try:
            return self._terms == NCPoly.constant(other)._terms
        except (TypeError, ValueError):
            return NotImplemented

    def __hash__(self) -> int:
        return hash(frozenset(self._terms.items()))

    def truncate(self, degree: int) -> "NCPoly":
        return NCPoly._from_reduced({w: c for w, c in self._terms.items() if len(w) <= degree})

    def homogeneous_part(self, degree: int) -> "NCPoly":
        return NCPoly._from_reduced({w: c for w, c in self._terms.items() if len(w) == degree})

    def map_words(self, func) -> "NCPoly":
        """Apply a word -> word map termwise (coefficients collected)."""
        return NCPoly({func(word): coef for word, coef in self._terms.items()})

    def to_text(self, names: Sequence[str] = DEFAULT_NAMES) -> str:
        if not self._terms:
            return "0"
        pieces = []
        for word, coef in self.items():
            sign = "-" if coef < 0 else "+"
            magnitude = abs(coef)
            if not word:
                body = format_scalar(magnitude)
            elif magnitude == 1:
                body = format_word(word, names)
            else:
                body = f"{format_scalar(magnitude)}*{format_word(word, names)}"
            pieces.append((sign, body))
        first_sign, first_body = pieces[0]
        text = ("-" if first_sign == "-" else "") + first_body
        for sign, body in pieces[1:]:
            text += f" {sign} {body}"
        return text

    def __repr__(self) -> str:
        return f"NCPoly({self.to_text()})"


def poly_mul(a: NCPoly, b: NCPoly) -> NCPoly:
    """Group ring product; word products are reduced at the junction."""
    out: Dict[Word, Fraction] = {}
    for u, x in a._terms.items():
        for v, y in b._terms.items():
            word = word_mul(u, v)
            total = out.get(word, 0) + x * y
            if total:
                out[word] = total
            else:
                out.pop(word, None)
    return NCPoly._from_reduced(out)


def trace_const(a: NCPoly) -> Fraction:
    """The constant-term trace: coefficient of the empty word."""
    return a.coefficient(())


def trace_of_product(a: NCPoly, b: NCPoly) -> Fraction:
    """trace_const(a*b) without forming the product."""
    small, large = (a, b) if len(a) <= len(b) else (b, a)
    total = Fraction(0)
    for word, coef in small._terms.items():
        other = large._terms.get(word_inverse(word))
        if other:
            total += coef * other
    return total


def commutator(a, b):
    return a * b - b * a


# ---------------------------------------------------------------------------
# Truncated series in the free algebra
# ---------------------------------------------------------------------------

class TruncSeries:
    """
    Element of Q<<X_1..X_n>> truncated at word length `order`.

    Stored as graded parts 0..order; only monoid words (no inverse letters).
    """

    __slots__ = ("order", "_parts")

    def __init__(self, poly=None, order: int = DEFAULT_ORDER):
        if order < 0:
            raise ValueError("Series order must be non-negative")
        if poly is None:
            poly = NCPoly.zero()
        elif not isinstance(poly, NCPoly):
            poly = NCPoly(poly) if isinstance(poly, Mapping) else NCPoly.constant(poly)
        buckets: List[Dict[Word, Fraction]] = [{} for _ in range(order + 1)]
        for word, coef in poly._terms.items():
            if not is_monoid_word(word):
                raise ValueError(f"Series words must not contain inverse letters: {word}")
            if len(word) <= order:
                buckets[len(word)][word] = coef
        self.order = order
        self._parts = tuple(NCPoly._from_reduced(bucket) for bucket in buckets)

    @classmethod
    def _from_parts(cls, parts: Sequence[NCPoly], order: int) -> "TruncSeries":
        series = cls.__new__(cls)
        series.order = order
        series._parts = tuple(parts[:order + 1]) + tuple(
            NCPoly.zero() for _ in range(order + 1 - len(parts)))
        return series

    @classmethod
    def one(cls, order: int = DEFAULT_ORDER) -> "TruncSeries":
        return cls(NCPoly.one(), order)

    def part(self, degree: int) -> NCPoly:
        if degree < 0 or degree > self.order:
            return NCPoly.zero()
        return self._parts[degree]

    @property
    def parts(self) -> Tuple[NCPoly, ...]:
        return self._parts

    @property
    def poly(self) -> NCPoly:
        out: Dict[Word, Fraction] = {}
        for part in self._parts:
            out.update(part._terms)
        return NCPoly._from_reduced(out)

    @property
    def constant_term(self) -> Fraction:
        return self._parts[0].coefficient(())

    @property
    def is_zero(self) -> bool:
        return all(part.is_zero for part in self._parts)

    def truncate(self, order: int) -> "TruncSeries":
        order = min(order, self.order)
        return TruncSeries._from_parts(self._parts[:order + 1], order)

    def _coerce(self, other) -> Optional["TruncSeries"]:
        if isinstance(other, TruncSeries):
            return other
        if isinstance(other, NCPoly):
            return TruncSeries(other, self.order)
        try:
            return TruncSeries(NCPoly.constant(other), self.order)
        except (TypeError, ValueError):
            return None

    def __add__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        order = min(self.order, other.order)
        return TruncSeries._from_parts(
            [self._parts[d] + other._parts[d] for d in range(order + 1)], order)

    __radd__ = __add__

    def __neg__(self) -> "TruncSeries":
        return TruncSeries._from_parts([-part for part in self._parts], self.order)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, CentralPoly):
            return NotImplemented
        if not isinstance(other, (TruncSeries, NCPoly)):
            try:
                value = to_fraction(other)
            except (TypeError, ValueError):
                return NotImplemented
            return TruncSeries._from_parts([part.scale(value) for part in self._parts], self.order)
        other = self._coerce(other)
        order = min(self.order, other.order)
        parts = []
        for degree in range(order + 1):
            acc = NCPoly.zero()
            for i in range(degree + 1):
                left, right = self._parts[i], other._parts[degree - i]
                if left.is_zero or right.is_zero:
                    continue
                acc = acc + poly_mul(left, right)
            parts.append(acc)
        return TruncSeries._from_parts(parts, order)

    def __rmul__(self, other):
        if isinstance(other, NCPoly):
            return TruncSeries(other, self.order) * self
        try:
            value = to_fraction(other)
        except (TypeError, ValueError):
            return NotImplemented
        return TruncSeries._from_parts([part.scale(value) for part in self._parts], self.order)

    def __pow__(self, exponent: int) -> "TruncSeries":
        if exponent < 0:
            return series_inverse(self) ** (-exponent)
        result = TruncSeries.one(self.order)
        for _ in range(exponent):
            result = result * self
        return result

    def inverse(self) -> "TruncSeries":
        return series_inverse(self)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TruncSeries):
            other = self._coerce(other)
            if other is None:
                return NotImplemented
        return self.order == other.order and self._parts == other._parts

    def __hash__(self) -> int:
        return hash((self.order, self._parts))

    def agrees_with(self, other: "TruncSeries", upto: int) -> bool:
        """Equality of all graded parts up to word length `upto`."""
        return all(self.part(d) == other.part(d) for d in range(upto + 1))

    def to_text(self, names: Sequence[str] = DEFAULT_NAMES) -> str:
        return f"{self.poly.to_text(names)} + O({self.order + 1})"

    def __repr__(self) -> str:
        return f"TruncSeries({self.to_text()})"


def series_inverse(series: TruncSeries) -> TruncSeries:
    """
    Two-sided inverse of a series with invertible constant term, solved
    degree by degree: r_0 = 1/c_0, r_d = -(1/c_0) * sum_{i=1..d} s_i r_{d-i}.
    """
    c0 = series.constant_term
    if not c0:
        raise ValueError("Series constant term is not invertible")
    inv_c0 = 1 / c0
    parts = [NCPoly.constant(inv_c0)]
    for degree in range(1, series.order + 1):
        acc = NCPoly.zero()
        for i in range(1, degree + 1):
            left = series.part(i)
            if left.is_zero or parts[degree - i].is_zero:
                continue
            acc = acc + poly_mul(left, parts[degree - i])
        parts.append(acc.scale(-inv_c0))
    return TruncSeries._from_parts(parts, series.order)


# ---------------------------------------------------------------------------
# Polynomials in a central variable
# ---------------------------------------------------------------------------

Coefficient = Union[NCPoly, TruncSeries]


class CentralPoly:
    """Polynomial in a central variable (t or tau) with NCPoly/TruncSeries coefficients."""

    __slots__ = ("coefficients", "variable")

    def __init__(self, coefficients: Sequence[Coefficient], variable: str = "t"):
        coeffs = list(coefficients)
        while coeffs and coeffs[-1].is_zero:
            coeffs.pop()
        self.coefficients: Tuple[Coefficient, ...] = tuple(coeffs)
        self.variable = variable

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    @property
    def is_zero(self) -> bool:
        return not self.coefficients

    def coefficient(self, power: int) -> Optional[Coefficient]:
        if 0 <= power < len(self.coefficients):
            return self.coefficients[power]
        return None

    @staticmethod
    def _plus(a: Optional[Coefficient], b: Optional[Coefficient]) -> Optional[Coefficient]:
        if a is None:
            return b
        if b is None:
            return a
        return a + b

    def __add__(self, other: "CentralPoly") -> "CentralPoly":
        size = max(len(self.coefficients), len(other.coefficients))
        return CentralPoly(
            [self._plus(self.coefficient(k), other.coefficient(k)) for k in range(size)],
            self.variable)

    def __neg__(self) -> "CentralPoly":
        return CentralPoly([-c for c in self.coefficients], self.variable)

    def __sub__(self, other: "CentralPoly") -> "CentralPoly":
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, CentralPoly):
            if self.is_zero or other.is_zero:
                return CentralPoly([], self.variable)
            out: List[Optional[Coefficient]] = [None] * (self.degree + other.degree + 1)
            for i, a in enumerate(self.coefficients):
                for j, b in enumerate(other.coefficients):
                    out[i + j] = self._plus(out[i + j], a * b)
            return CentralPoly(out, self.variable)
        return CentralPoly([c * other for c in self.coefficients], self.variable)

    def __rmul__(self, other):
        return CentralPoly([other * c for c in self.coefficients], self.variable)

    def evaluate(self, value) -> Optional[Coefficient]:
        """Substitute a rational value for the central variable."""
        value = to_fraction(value)
        total: Optional[Coefficient] = None
        power = Fraction(1)
        for coef in self.coefficients:
            total = self._plus(total, coef * power)
            power *= value
        return total

    def __eq__(self, other) -> bool:
        if not isinstance(other, CentralPoly):
            return NotImplemented
        return self.coefficients == other.coefficients

    def __hash__(self) -> int:
        return hash(self.coefficients)

    def __repr__(self) -> str:
        terms = [f"({c!r})*{self.variable}^{k}" for k, c in enumerate(self.coefficients)]
        return "CentralPoly(" + (" + ".join(terms) or "0") + ")"


# ---------------------------------------------------------------------------
# Commutative scalar series
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _series_ring(variables: Tuple[str, ...]):
    """QQ[variables, _s]; _s carries total degree so sympy truncates by it."""
    R, *gens = ring(",".join(variables) + ",_s", QQ)
    return R, gens[-1]


class ScalarSeries:
    """
    Commutative truncated series over Q in one variable (t) or several
    (x, y), keeping every term of total degree <= order.
    """

    __slots__ = ("variables", "order", "_coeffs")

    def __init__(self, coeffs: Mapping, order: int, variables: Sequence[str] = ("t",)):
        self.variables: Tuple[str, ...] = tuple(variables)
        self.order = order
        cleaned: Dict[Tuple[int, ...], Fraction] = {}
        for key, coef in coeffs.items():
            exps = (key,) if isinstance(key, int) else tuple(key)
            if len(exps) != len(self.variables):
                raise ValueError(f"Exponent {exps} does not match variables {self.variables}")
            if sum(exps) > order:
                continue
            value = to_fraction(coef)
            if value:
                cleaned[exps] = cleaned.get(exps, 0) + value
        self._coeffs = {k: v for k, v in cleaned.items() if v}

    @classmethod
    def from_list(cls, values: Sequence, variable: str = "t", order: Optional[int] = None) -> "ScalarSeries":
        order = len(values) - 1 if order is None else order
        return cls({(k,): v for k, v in enumerate(values)}, order, (variable,))

    @classmethod
    def one(cls, order: int, variables: Sequence[str] = ("t",)) -> "ScalarSeries":
        return cls({(0,) * len(variables): 1}, order, variables)

    @classmethod
    def zero(cls, order: int, variables: Sequence[str] = ("t",)) -> "ScalarSeries":
        return cls({}, order, variables)

    @classmethod
    def from_sympy(cls, expr, order: int, variables: Sequence[str] = ("x", "y")) -> "ScalarSeries":
        """Expand a polynomial sympy expression (or string) into a series."""
        symbols = sympy.symbols(list(variables))
        try:
            poly = sympy.Poly(sympy.sympify(expr), *symbols)
        except sympy.PolynomialError as e:
            raise ValueError(f"Not a polynomial in {', '.join(variables)}: {expr}") from e
        if poly.domain.is_Exact is False:
            raise ValueError("Coefficients must be exact")
        return cls({monom: to_fraction(coef) for monom, coef in poly.terms()}, order, variables)

    # -- conversion to and from sympy ring elements -----------------------

    def _to_ring(self):
        R, s = _series_ring(self.variables)
        data = {exps + (sum(exps),): QQ(c.numerator, c.denominator) for exps, c in self._coeffs.items()}
        return R.from_dict(data) if data else R.zero, s

    def _from_ring(self, element, order: Optional[int] = None) -> "ScalarSeries":
        coeffs = {monom[:-1]: to_fraction(coef) for monom, coef in element.items()}
        return ScalarSeries(coeffs, self.order if order is None else order, self.variables)

    # -- inspection -------------------------------------------------------

    def coefficient(self, *exponents: int) -> Fraction:
        return self._coeffs.get(tuple(exponents), Fraction(0))

    def coefficients(self) -> List[Fraction]:
        """Dense coefficient list 0..order (univariate only)."""
        if len(self.variables) != 1:
            raise ValueError("Dense coefficient list needs a univariate series")
        return [self.coefficient(k) for k in range(self.order + 1)]

    def items(self) -> List[Tuple[Tuple[int, ...], Fraction]]:
        return sorted(self._coeffs.items(), key=lambda item: (sum(item[0]), item[0]))

    @property
    def constant_term(self) -> Fraction:
        return self.coefficient(*([0] * len(self.variables)))

    @property
    def is_zero(self) -> bool:
        return not self._coeffs

    def is_integral(self) -> bool:
        return all(c.denominator == 1 for c in self._coeffs.values())

    # -- arithmetic -------------------------------------------------------

    def _check(self, other: "ScalarSeries") -> int:
        if other.variables != self.variables:
            raise ValueError(f"Variable mismatch {self.variables} vs {other.variables}")
        return min(self.order, other.order)

    def _lift(self, other) -> Optional["ScalarSeries"]:
        if isinstance(other, ScalarSeries):
            return other
        try:
            value = to_fraction(other)
        except (TypeError, ValueError):
            return None
        return ScalarSeries({(0,) * len(self.variables): value}, self.order, self.variables)

    def __add__(self, other):
        other = self._lift(other)
        if other is None:
            return NotImplemented
        order = self._check(other)
        out = dict(self._coeffs)
        for key, value in other._coeffs.items():
            out[key] = out.get(key, 0) + value
        return ScalarSeries(out, order, self.variables)

    __radd__ = __add__

    def __neg__(self) -> "ScalarSeries":
        return ScalarSeries({k: -v for k, v in self._coeffs.items()}, self.order, self.variables)

    def __sub__(self, other):
        other = self._lift(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, ScalarSeries):
            try:
                value = to_fraction(other)
            except (TypeError, ValueError):
                return NotImplemented
            return ScalarSeries({k: v * value for k, v in self._coeffs.items()}, self.order, self.variables)
        order = self._check(other)
        a, s = self._to_ring()
        b, _ = other._to_ring()
        return self._from_ring(rs_mul(a, b, s, order + 1), order)

    __rmul__ = __mul__

    def __pow__(self, exponent: int) -> "ScalarSeries":
        if exponent < 0:
            return self.inverse() ** (-exponent)
        result = ScalarSeries.one(self.order, self.variables)
        for _ in range(exponent):
            result = result * self
        return result

    def __eq__(self, other) -> bool:
        if not isinstance(other, ScalarSeries):
            return NotImplemented
        return (self.variables, self.order, self._coeffs) == (other.variables, other.order, other._coeffs)

    def __hash__(self) -> int:
        return hash((self.variables, self.order, frozenset(self._coeffs.items())))

    def agrees_with(self, other: "ScalarSeries", upto: int) -> bool:
        keys = set(self._coeffs) | set(other._coeffs)
        return all(self.coefficient(*k) == other.coefficient(*k) for k in keys if sum(k) <= upto)

    def truncate(self, order: int) -> "ScalarSeries":
        return ScalarSeries(self._coeffs, min(order, self.order), self.variables)

    def exp(self) -> "ScalarSeries":
        if self.constant_term:
            raise ValueError("exp requires a series with zero constant term")
        element, s = self._to_ring()
        return self._from_ring(rs_exp(element, s, self.order + 1))

    def log(self) -> "ScalarSeries":
        if self.constant_term != 1:
            raise ValueError("log requires a series with constant term 1")
        element, s = self._to_ring()
        return self._from_ring(rs_log(element, s, self.order + 1))

    def sqrt(self) -> "ScalarSeries":
        if self.constant_term != 1:
            raise ValueError("sqrt requires a series with constant term 1")
        element, s = self._to_ring()
        return self._from_ring(rs_nth_root(element, 2, s, self.order + 1))

    def inverse(self) -> "ScalarSeries":
        if not self.constant_term:
            raise ValueError("Series constant term is not invertible")
        element, s = self._to_ring()
        return self._from_ring(rs_series_inversion(element, s, self.order + 1))

    def euler(self) -> "ScalarSeries":
        """Total-degree operator sum_i v_i d/dv_i (t d/dt for one variable)."""
        return ScalarSeries({k: v * sum(k) for k, v in self._coeffs.items()}, self.order, self.variables)

    def derivative(self) -> "ScalarSeries":
        """d/dt of a univariate series (order drops by one)."""
        if len(self.variables) != 1:
            raise ValueError("derivative needs a univariate series")
        return ScalarSeries({(k[0] - 1,): v * k[0] for k, v in self._coeffs.items() if k[0]},
                            max(self.order - 1, 0), self.variables)

    def restrict_line(self, slope=1, variable: str = "t") -> "ScalarSeries":
        """Bivariate -> univariate by x = t, y = slope * t."""
        if len(self.variables) != 2:
            raise ValueError("restrict_line needs a bivariate series")
        slope = to_fraction(slope)
        out: Dict[Tuple[int], Fraction] = {}
        for (n, m), value in self._coeffs.items():
            key = (n + m,)
            out[key] = out.get(key, 0) + value * slope ** m
        return ScalarSeries(out, self.order, (variable,))

    def compress(self, step: int, variable: str = "z") -> "ScalarSeries":
        """Substitute z = t^step into a univariate series supported on multiples of step."""
        if len(self.variables) != 1:
            raise ValueError("compress needs a univariate series")
        out = {}
        for (k,), value in self._coeffs.items():
            if k % step:
                raise ValueError(f"Exponent {k} is not a multiple of {step}")
            out[(k // step,)] = value
        return ScalarSeries(out, self.order // step, (variable,))

    def to_sympy(self):
        symbols = sympy.symbols(list(self.variables))
        if not isinstance(symbols, (list, tuple)):
            symbols = [symbols]
        terms = []
        for exps, value in self._coeffs.items():
            term = sympy.Rational(value.numerator, value.denominator)
            for sym, e in zip(symbols, exps):
                term *= sym ** e
            terms.append(term)
        return sympy.Add(*terms)

    def to_text(self) -> str:
        return f"{sympy.sstr(self.to_sympy())} + O({self.order + 1})"

    def __repr__(self) -> str:
        return f"ScalarSeries({self.to_text()})"


def scalar_series_exp_log(series: ScalarSeries, mode: str) -> ScalarSeries:
    """exp (zero constant term) or log (constant term 1) of a scalar series."""
    if mode == "exp":
        return series.exp()
    if mode == "log":
        return series.log()
    raise ValueError(f"Unknown mode {mode!r}; expected 'exp' or 'log'")


# ---------------------------------------------------------------------------
# Abelianization
# ---------------------------------------------------------------------------

def _exponent_vector(word: Word, count: int) -> Tuple[int, ...]:
    exps = [0] * count
    for letter in word:
        exps[abs(letter) - 1] += 1 if letter > 0 else -1
    return tuple(exps)


def abelianize(element: Union[NCPoly, TruncSeries], names: Optional[Sequence[str]] = None):
    """
    Ring homomorphism X_i -> x_i onto commuting variables.

    An NCPoly maps to an expanded sympy Laurent polynomial; a TruncSeries maps
    to a ScalarSeries of the same order in lowercase variables.
    """
    if isinstance(element, TruncSeries):
        count = max((abs(l) for part in element.parts for w in part for l in w), default=0)
        names = tuple(names) if names else generator_names(max(count, 2))
        variables = tuple(name.lower() for name in names)
        coeffs: Dict[Tuple[int, ...], Fraction] = {}
        for part in element.parts:
            for word, coef in part._terms.items():
                key = _exponent_vector(word, len(variables))
                coeffs[key] = coeffs.get(key, 0) + coef
        return ScalarSeries(coeffs, element.order, variables)
    count = element.num_generators()
    names = tuple(names) if names else generator_names(max(count, 1))
    symbols = [sympy.Symbol(name.lower()) for name in names]
    total = sympy.Integer(0)
    for word, coef in element._terms.items():
        term = sympy.Rational(coef.numerator, coef.denominator)
        for sym, e in zip(symbols, _exponent_vector(word, len(symbols))):
            term *= sym ** e
        total += term
    return sympy.expand(total)
