"""
Shuffle Derivations and the R(tau) Flow

Derivations of the free algebra Q<<X, Y>> of the form
delta(X) = [D, X], delta(Y) = 0 with D = sum f_{n,m} c_{n,m}, where c_{n,m}
is the sum of all words with n letters X and m letters Y. Provides the
intertwiners D_t, the abelian-bracket check, the conjugator ODE

    dR/dtau = delta(R) + R D,   R(0) = 1

solved exactly in tau, and the Catalan example R = 1 - YX - C.
"""

import logging
import random
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Dict, List, Optional, Tuple, Union

import sympy

from guessing import binomial_weight, log_coefficients
from nc_core import (
    DEFAULT_ORDER,
    CentralPoly,
    NCPoly,
    ScalarSeries,
    TruncSeries,
    Word,
    abelianize,
    commutator,
    format_scalar,
    is_monoid_word,
    to_fraction,
)

logger = logging.getLogger(__name__)

X = 1
Y = 2
DEFAULT_FLOW_ORDER = 8

Index = Tuple[int, int]


def shuffle_c(n: int, m: int) -> NCPoly:
    """Sum of all C(n+m, n) words with n letters X and m letters Y."""
    if n < 0 or m < 0 or n + m < 1:
        raise ValueError("shuffle_c needs n, m >= 0 and n + m >= 1")
    length = n + m
    terms = {}
    for y_positions in combinations(range(length), m):
        word = [X] * length
        for position in y_positions:
            word[position] = Y
        terms[tuple(word)] = 1
    return NCPoly(terms)


@dataclass
class DeltaSpec:
    """
    delta = sum f_{n,m} delta_{n,m} with m >= 1, truncated at total degree `order`.
    """

    coefficients: Dict[Index, Fraction]
    order: int = DEFAULT_FLOW_ORDER
    dropped: Dict[Index, Fraction] = field(default_factory=dict)

    def __post_init__(self):
        kept = {}
        for (n, m), value in self.coefficients.items():
            value = to_fraction(value)
            if not value or n + m > self.order:
                continue
            if m < 1:
                self.dropped[(n, m)] = value
                continue
            kept[(n, m)] = value
        if self.dropped:
            logger.warning(f"DeltaSpec drops terms without Y: {sorted(self.dropped)}")
        self.coefficients = kept

    @classmethod
    def basis(cls, n: int, m: int, order: Optional[int] = None) -> "DeltaSpec":
        return cls({(n, m): Fraction(1)}, max(order or 0, n + m))

    @classmethod
    def from_series(cls, series: ScalarSeries, order: Optional[int] = None) -> "DeltaSpec":
        order = series.order if order is None else order
        return cls({exps: value for exps, value in series.items()}, order)

    @classmethod
    def from_text(cls, text: str, order: int) -> "DeltaSpec":
        """'log(P)' for a polynomial P, or a polynomial generating series itself."""
        expr = sympy.sympify(text, locals={"x": sympy.Symbol("x"), "y": sympy.Symbol("y")})
        if expr.func == sympy.log:
            return cls.from_series(log_coefficients(expr.args[0], order), order)
        return cls.from_series(ScalarSeries.from_sympy(expr, order, ("x", "y")), order)

    @property
    def is_zero(self) -> bool:
        return not self.coefficients

    def element(self) -> NCPoly:
        """D = sum f_{n,m} c_{n,m}."""
        total = NCPoly.zero()
        for (n, m), value in sorted(self.coefficients.items()):
            total = total + shuffle_c(n, m).scale(value)
        return total

    def generating_series(self) -> ScalarSeries:
        return ScalarSeries(self.coefficients, self.order, ("x", "y"))

    def to_dict(self) -> Dict:
        return {f"{n},{m}": format_scalar(v) for (n, m), v in sorted(self.coefficients.items())}


def is_log_one_minus_xy(text: str) -> bool:
    """Whether delta text is log(1 - x*y) up to sympy expansion."""
    x, y = sympy.symbols("x y")
    expr = sympy.sympify(text, locals={"x": x, "y": y})
    return expr.func == sympy.log and sympy.expand(expr.args[0] - (1 - x * y)) == 0


SpecLike = Union[DeltaSpec, Index]


def _as_spec(spec: SpecLike) -> DeltaSpec:
    if isinstance(spec, DeltaSpec):
        return spec
    n, m = spec
    return DeltaSpec.basis(n, m)


def _apply_to_poly(D: NCPoly, a: NCPoly, limit: Optional[int]) -> NCPoly:
    out: Dict[Word, Fraction] = {}

    def bump(word: Word, value: Fraction) -> None:
        if limit is not None and len(word) > limit:
            return
        out[word] = out.get(word, 0) + value

    d_terms = D.items()
    for word, coef in a.items():
        if not is_monoid_word(word):
            raise ValueError(f"Derivations act on monoid words only: {word}")
        for i, letter in enumerate(word):
            if letter != X:
                continue
            for u, c in d_terms:
                bump(word[:i] + u + word[i:], coef * c)
                bump(word[:i + 1] + u + word[i + 1:], -coef * c)
    return NCPoly(out)


def apply_delta(spec: SpecLike, a: Union[NCPoly, TruncSeries], N: Optional[int] = None):
    """
    delta(a) by the Leibniz rule: each X in a word becomes D X - X D.

    NCPoly inputs return an NCPoly (truncated at N when given); TruncSeries
    inputs return a TruncSeries of the same order.
    """
    D = _as_spec(spec).element()
    if isinstance(a, TruncSeries):
        limit = a.order if N is None else min(N, a.order)
        return TruncSeries(_apply_to_poly(D, a.poly, limit), a.order)
    return _apply_to_poly(D, a, N)


def intertwiner_Dt(n: int, m: int) -> CentralPoly:
    """D_t = sum_{k=0..n} c_{n-k, m+k} t^k."""
    if m < 1:
        raise ValueError("intertwiner_Dt needs m >= 1")
    return CentralPoly([shuffle_c(n - k, m + k) for k in range(n + 1)], "t")


def check_intertwine(n: int, m: int) -> CentralPoly:
    """[c_{n,m}, X] - [D_t, X + tY] as a polynomial in t; zero when the identity holds."""
    D_t = intertwiner_Dt(n, m)
    moving = CentralPoly([NCPoly.generator(X), NCPoly.generator(Y)], "t")
    lhs = CentralPoly([commutator(shuffle_c(n, m), NCPoly.generator(X))], "t")
    return lhs - (D_t * moving - moving * D_t)


def intertwine_sweep(max_degree: int = 6) -> Dict[Index, bool]:
    """check_intertwine for every n + m <= max_degree with m >= 1."""
    results = {}
    for total in range(1, max_degree + 1):
        for m in range(1, total + 1):
            results[(total - m, m)] = check_intertwine(total - m, m).is_zero
    return results


def bracket_residual(i1: SpecLike, i2: SpecLike, test: NCPoly, N: int) -> NCPoly:
    """(delta_1 delta_2 - delta_2 delta_1)(test), truncated at word length N."""
    first = apply_delta(i1, apply_delta(i2, test, N), N)
    second = apply_delta(i2, apply_delta(i1, test, N), N)
    return first - second


def random_monoid_poly(rng: random.Random, max_degree: int = 3, max_terms: int = 3) -> NCPoly:
    terms = {}
    for _ in range(rng.randint(1, max_terms)):
        length = rng.randint(1, max_degree)
        terms[tuple(rng.choice((X, Y)) for _ in range(length))] = rng.randint(-3, 3) or 1
    return NCPoly(terms)


def random_bracket_suite(seed: int, cases: int = 25, N: int = 10,
                         max_index_degree: int = 6) -> List[Tuple[Index, Index, NCPoly, bool]]:
    """Seeded (index pair, test element) cases with their bracket verdicts."""
    rng = random.Random(seed)
    indices = [(total - m, m) for total in range(1, max_index_degree + 1) for m in range(1, total + 1)]
    results = []
    for _ in range(cases):
        i1, i2 = rng.choice(indices), rng.choice(indices)
        test = random_monoid_poly(rng)
        results.append((i1, i2, test, bracket_residual(i1, i2, test, N).is_zero))
    return results


def integrate_R(spec: SpecLike, N: int = DEFAULT_FLOW_ORDER) -> CentralPoly:
    """
    R(tau) = sum_j R_j tau^j with (j+1) R_{j+1} = delta(R_j) + R_j D, R_0 = 1.

    delta and right multiplication by D raise word degree, so R_j starts in
    degree >= j and the recursion stops after N steps.
    """
    spec = _as_spec(spec)
    D = TruncSeries(spec.element(), N)
    parts = [TruncSeries.one(N)]
    for j in range(N):
        current = parts[-1]
        nxt = (apply_delta(spec, current) + current * D) * Fraction(1, j + 1)
        if nxt.is_zero:
            break
        parts.append(nxt)
        logger.debug(f"integrate_R: tau^{j + 1} coefficient has {len(nxt.poly)} words")
    return CentralPoly(parts, "tau")


def catalan_C(N: int = DEFAULT_FLOW_ORDER) -> TruncSeries:
    """The solution of C = X (1 - C)^-1 Y, iterated degree by degree."""
    if N < 2:
        raise ValueError("catalan_C needs N >= 2")
    x = TruncSeries(NCPoly.generator(X), N)
    y = TruncSeries(NCPoly.generator(Y), N)
    C = TruncSeries(None, N)
    for _ in range(N // 2 + 1):
        nxt = x * (1 - C).inverse() * y
        if nxt == C:
            break
        C = nxt
    return C


def strip_leading_x(series: TruncSeries) -> TruncSeries:
    """X^-1 * series for a series whose words all start with X."""
    terms = {}
    for word, coef in series.poly.items():
        if not word or word[0] != X:
            raise ValueError(f"Word {word} does not start with X")
        terms[word[1:]] = coef
    return TruncSeries(NCPoly(terms), series.order - 1)


def catalan_R(N: int = DEFAULT_FLOW_ORDER) -> TruncSeries:
    """R = 1 - YX - C."""
    C = catalan_C(N)
    return 1 - TruncSeries(NCPoly.word((Y, X)), N) - C


def verify_conjugation(N: int = DEFAULT_FLOW_ORDER) -> CentralPoly:
    """
    (R X R^-1 + tY) R_t - R_t (X + tY) with R_t = R (1 - t T^2), T = X^-1 C.

    C is built one degree higher so that T is exact through degree N.
    """
    if N < 4:
        raise ValueError("verify_conjugation needs N >= 4")
    T = strip_leading_x(catalan_C(N + 1))
    R = catalan_R(N)
    x = TruncSeries(NCPoly.generator(X), N)
    y = TruncSeries(NCPoly.generator(Y), N)
    conjugated = R * x * R.inverse()
    R_t = CentralPoly([R, -(R * T * T)], "t")
    left = CentralPoly([conjugated, y], "t")
    right = CentralPoly([x, y], "t")
    return left * R_t - R_t * right


def quadratic_residual(N: int = DEFAULT_FLOW_ORDER) -> TruncSeries:
    """X T^2 - T + Y, the inverse-free form of the quadratic satisfied by T."""
    T = strip_leading_x(catalan_C(N + 1))
    x = TruncSeries(NCPoly.generator(X), N)
    y = TruncSeries(NCPoly.generator(Y), N)
    return x * T * T - T + y


def abelian_check(spec: DeltaSpec, N: int = DEFAULT_FLOW_ORDER) -> Tuple[bool, ScalarSeries, ScalarSeries]:
    """
    ab(R(1)) against exp(sum C(n+m, n) f_{n,m} x^n y^m).

    Commutators die under abelianization, so the ODE becomes
    d ab(R)/dtau = ab(R) ab(D) and ab(D) is the binomially weighted series.
    """
    R1 = integrate_R(spec, N).evaluate(1)
    abelian = abelianize(R1, ("X", "Y"))
    generating = ScalarSeries(spec.coefficients, N, ("x", "y"))
    expected = binomial_weight(generating).exp()
    return abelian.agrees_with(expected, N), abelian, expected


@dataclass
class FlowReport:
    delta_spec: Dict
    order: int
    intertwine_ok: bool
    bracket_ok: bool
    abelian_ok: Optional[bool] = None
    R_matches_closed_form: Optional[bool] = None
    conjugation_residual_zero: Optional[bool] = None
    quadratic_residual_zero: Optional[bool] = None
    failures: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        checks = [self.intertwine_ok, self.bracket_ok, self.abelian_ok,
                  self.R_matches_closed_form, self.conjugation_residual_zero,
                  self.quadratic_residual_zero]
        return all(c is not False for c in checks)


def run_flow_checks(spec: Optional[DeltaSpec] = None, N: int = DEFAULT_FLOW_ORDER,
                    max_degree: int = 6, catalan: bool = True, seed: int = 0,
                    bracket_cases: int = 25) -> FlowReport:
    """The full flow battery used by the command line and the acceptance suite."""
    if spec is None:
        spec = DeltaSpec.from_series(log_coefficients("1 - x*y", N), N)
    sweep = intertwine_sweep(max_degree)
    suite = random_bracket_suite(seed, bracket_cases, max(N, 10))
    report = FlowReport(
        delta_spec=spec.to_dict(),
        order=N,
        intertwine_ok=all(sweep.values()),
        bracket_ok=all(ok for *_, ok in suite),
    )
    for index, ok in sweep.items():
        if not ok:
            report.failures.append(f"intertwine {index}")
    report.abelian_ok = abelian_check(spec, N)[0]
    if catalan:
        R1 = integrate_R(spec, N).evaluate(1)
        report.R_matches_closed_form = R1 == catalan_R(N)
        report.conjugation_residual_zero = verify_conjugation(N).is_zero
        report.quadratic_residual_zero = quadratic_residual(N).is_zero
    for name in ("abelian_ok", "R_matches_closed_form", "conjugation_residual_zero",
                 "quadratic_residual_zero"):
        if getattr(report, name) is False:
            report.failures.append(name)
            logger.error(f"Flow check failed: {name}")
    logger.info(f"Flow checks at N={N}: {'PASS' if report.passed else 'FAIL'}")
    return report
