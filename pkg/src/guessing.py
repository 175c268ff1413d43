"""
Algebraic Series Guessing

Finds and verifies polynomial annihilators Q(t, S) of truncated power
series, and implements the binomial transform

    P -> exp(sum C(n+m, n) f_{n,m} x^n y^m),   log P = sum f_{n,m} x^n y^m

together with the batteries that collect algebraicity evidence for the
characteristic series families and for transformed polynomials.
"""

import logging
import random
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb, gcd
from typing import Dict, List, Optional, Sequence, Tuple, Union

import sympy

from exact_linalg import integer_nullspace
from nc_core import NcidError, ScalarSeries, format_scalar, to_fraction

logger = logging.getLogger(__name__)

DEFAULT_MARGIN = 15

Monomial = Tuple[int, int]


class InsufficientCoefficients(NcidError):
    """Raised when a series is too short for the requested degree bounds."""

    def __init__(self, needed: int, have: int):
        super().__init__(f"Need {needed} series coefficients, have {have}")
        self.needed = needed
        self.have = have


@dataclass
class AnnihilatorPoly:
    """
    Q(t, S) = sum q_{i,j} t^i S^j with Q(t, s(t)) = 0 to the verified order.

    `coefficients` is normalized (first term in (S desc, t asc) order is 1);
    `integer_coefficients` is the primitive integer multiple with the same sign.
    """

    coefficients: Dict[Monomial, Fraction]
    integer_coefficients: Dict[Monomial, int]
    deg_t: int
    deg_s: int
    margin: int
    variable: str = "t"
    verified: bool = False

    def terms(self) -> List[Tuple[int, int, Fraction]]:
        ordered = sorted(self.coefficients.items(), key=lambda item: (-item[0][1], item[0][0]))
        return [(i, j, q) for (i, j), q in ordered]

    def to_sympy(self, symbol: str = "S"):
        t, S = sympy.symbols(f"{self.variable} {symbol}")
        return sympy.expand(sum(sympy.Rational(q.numerator, q.denominator) * t ** i * S ** j
                                for (i, j), q in self.coefficients.items()))

    def to_text(self, symbol: str = "S") -> str:
        return sympy.sstr(sympy.collect(self.to_sympy(symbol), sympy.Symbol(symbol)))

    def to_dict(self) -> Dict:
        return {
            "degT": self.deg_t,
            "degS": self.deg_s,
            "variable": self.variable,
            "annihilator": [[i, j, format_scalar(q)] for i, j, q in self.terms()],
            "margin": self.margin,
            "verified": self.verified,
        }


@dataclass
class ResidualReport:
    """Outcome of substituting a series into an annihilator."""

    upto: int
    zero: bool
    first_nonzero: Optional[int] = None


# ---------------------------------------------------------------------------
# Dense helpers
# ---------------------------------------------------------------------------

def _dense(s: ScalarSeries, length: int) -> List[Fraction]:
    return [s.coefficient(k) for k in range(length)]


def _series_powers(values: Sequence[Fraction], top: int) -> List[List[Fraction]]:
    """values^0 .. values^top, each truncated to len(values)."""
    length = len(values)
    powers = [[Fraction(1)] + [Fraction(0)] * (length - 1)]
    for _ in range(top):
        prev = powers[-1]
        nxt = [Fraction(0)] * length
        for i, a in enumerate(prev):
            if not a:
                continue
            for j in range(length - i):
                if values[j]:
                    nxt[i + j] += a * values[j]
        powers.append(nxt)
    return powers


def normalize_annihilator(vector: Dict[Monomial, Fraction]) -> Dict[Monomial, Fraction]:
    """Scale so the first nonzero term in (S power desc, t power asc) order is 1."""
    ordered = sorted((m for m, q in vector.items() if q), key=lambda m: (-m[1], m[0]))
    if not ordered:
        raise ValueError("Annihilator must not be identically zero")
    lead = vector[ordered[0]]
    return {m: q / lead for m, q in vector.items() if q}


# ---------------------------------------------------------------------------
# Verification and search
# ---------------------------------------------------------------------------

def verify_annihilator(Q: AnnihilatorPoly, s: ScalarSeries, upto: int) -> ResidualReport:
    """
    Compose Q(t, s(t)) and report the first nonzero order, or zero through t^upto.
    """
    if len(s.variables) != 1:
        raise ValueError("verify_annihilator needs a univariate series")
    if s.order < upto:
        raise ValueError(f"Series known to order {s.order}, asked to verify to {upto}")
    values = _dense(s, upto + 1)
    powers = _series_powers(values, Q.deg_s)
    residual = [Fraction(0)] * (upto + 1)
    for (i, j), q in Q.coefficients.items():
        for k in range(i, upto + 1):
            residual[k] += q * powers[j][k - i]
    for k, value in enumerate(residual):
        if value:
            return ResidualReport(upto=upto, zero=False, first_nonzero=k)
    return ResidualReport(upto=upto, zero=True)


def _system_rows(powers: List[List[Fraction]], unknowns: List[Monomial],
                 start: int, stop: int) -> List[List[Fraction]]:
    rows = []
    for k in range(start, stop):
        rows.append([powers[j][k - i] if k >= i else Fraction(0) for (i, j) in unknowns])
    return rows


def guess_annihilator(s: ScalarSeries, max_deg_t: int, max_deg_s: int,
                      margin: int = DEFAULT_MARGIN) -> Optional[AnnihilatorPoly]:
    """
    Smallest (deg_s, deg_t) annihilator of a univariate series, or None.

    Degree pairs are searched with deg_s outermost. For each pair the
    nullspace of the coefficient map is computed exactly from all but the
    last `margin` known coefficients; a candidate is accepted only if it
    also kills the reserved margin.

    Raises:
        InsufficientCoefficients: fewer than (max_deg_t+1)(max_deg_s+1)+margin
            coefficients are known
    """
    if len(s.variables) != 1:
        raise ValueError("guess_annihilator needs a univariate series")
    have = s.order + 1
    needed = (max_deg_t + 1) * (max_deg_s + 1) + margin
    if have < needed:
        raise InsufficientCoefficients(needed, have)
    values = _dense(s, have)
    powers = _series_powers(values, max_deg_s)
    fit = have - margin
    for deg_s in range(1, max_deg_s + 1):
        for deg_t in range(max_deg_t + 1):
            unknowns = [(i, j) for j in range(deg_s + 1) for i in range(deg_t + 1)]
            basis = integer_nullspace(_system_rows(powers, unknowns, 0, fit))
            if not basis:
                continue
            if len(basis) > 1:
                logger.debug(f"Nullspace of dimension {len(basis)} at degS={deg_s}, degT={deg_t}")
                combined = _system_rows(powers, unknowns, 0, have)
                basis = integer_nullspace(combined)
                if not basis:
                    continue
            vector = basis[0]
            raw = {m: Fraction(v) for m, v in zip(unknowns, vector) if v}
            normalized = normalize_annihilator(raw)
            lead = sorted(raw, key=lambda m: (-m[1], m[0]))[0]
            sign = 1 if raw[lead] > 0 else -1
            candidate = AnnihilatorPoly(
                coefficients=normalized,
                integer_coefficients={m: sign * int(v) for m, v in raw.items()},
                deg_t=deg_t,
                deg_s=deg_s,
                margin=margin,
                variable=s.variables[0],
            )
            report = verify_annihilator(candidate, s, s.order)
            if not report.zero:
                logger.debug(f"Candidate at degS={deg_s}, degT={deg_t} fails at order {report.first_nonzero}")
                continue
            candidate.verified = True
            logger.info(f"Annihilator found: degS={deg_s}, degT={deg_t}")
            return candidate
    logger.info(f"No annihilator with degS<={max_deg_s}, degT<={max_deg_t}")
    return None


# ---------------------------------------------------------------------------
# Binomial transform
# ---------------------------------------------------------------------------

PolyInput = Union[ScalarSeries, str, "sympy.Expr"]


def _as_bivariate(P: PolyInput, N: int) -> ScalarSeries:
    if isinstance(P, ScalarSeries):
        if len(P.variables) != 2:
            raise ValueError("Expected a series in two variables")
        return P.truncate(N) if P.order >= N else ScalarSeries(dict(P.items()), N, P.variables)
    return ScalarSeries.from_sympy(P, N, ("x", "y"))


def _homogeneous_parts(series: ScalarSeries) -> Dict[int, Dict[Monomial, Fraction]]:
    parts: Dict[int, Dict[Monomial, Fraction]] = {}
    for exps, value in series.items():
        parts.setdefault(sum(exps), {})[exps] = value
    return parts


def log_coefficients(P: PolyInput, N: int) -> ScalarSeries:
    """
    log P for P with constant term 1, by the Euler-operator recurrence
    P * theta(L) = theta(P) taken one total degree at a time:

        k L_k = k P_k - sum_{j>=1} P_j (k-j) L_{k-j}
    """
    series = _as_bivariate(P, N)
    if series.constant_term != 1:
        raise ValueError("P must have constant term 1")
    p_parts = _homogeneous_parts(series)
    l_parts: Dict[int, Dict[Monomial, Fraction]] = {}
    for k in range(1, N + 1):
        acc: Dict[Monomial, Fraction] = {m: v * k for m, v in p_parts.get(k, {}).items()}
        for j, pj in p_parts.items():
            if j == 0 or j >= k:
                continue
            lower = l_parts.get(k - j)
            if not lower:
                continue
            for (a, b), u in pj.items():
                for (c, d), v in lower.items():
                    key = (a + c, b + d)
                    acc[key] = acc.get(key, 0) - u * v * (k - j)
        l_parts[k] = {m: v / k for m, v in acc.items() if v}
    coeffs = {m: v for part in l_parts.values() for m, v in part.items()}
    return ScalarSeries(coeffs, N, series.variables)


def binomial_weight(log_series: ScalarSeries) -> ScalarSeries:
    """sum f_{n,m} x^n y^m -> sum C(n+m, n) f_{n,m} x^n y^m."""
    return ScalarSeries({(n, m): v * comb(n + m, n) for (n, m), v in log_series.items()},
                        log_series.order, log_series.variables)


def binomial_transform(P: PolyInput, N: int) -> ScalarSeries:
    """exp of the binomially weighted logarithm of P, to total degree N."""
    return binomial_weight(log_coefficients(P, N)).exp()


def binomial_slice(P: PolyInput, N: int, slope=1) -> ScalarSeries:
    """The binomial transform on the line x = t, y = slope*t (restricted before exp)."""
    return binomial_weight(log_coefficients(P, N)).restrict_line(slope).exp()


def compress_series(s: ScalarSeries, variable: str = "z") -> Tuple[ScalarSeries, int]:
    """Substitute z = t^k for the largest k dividing every exponent present."""
    step = 0
    for (k,), _ in s.items():
        step = gcd(step, k)
    if step <= 1:
        return s, 1
    return s.compress(step, variable), step


# ---------------------------------------------------------------------------
# Batteries
# ---------------------------------------------------------------------------

@dataclass
class EvidenceEntry:
    """One series, the degree bounds tried and what was found."""

    series_id: str
    step: int
    annihilator: Optional[AnnihilatorPoly]
    max_deg_t: int
    max_deg_s: int
    expected: Optional[str] = None
    matches_expected: Optional[bool] = None

    @property
    def verified(self) -> bool:
        return self.annihilator is not None and self.annihilator.verified

    @property
    def status(self) -> str:
        return "verified" if self.verified else "not-found"

    def to_dict(self) -> Dict:
        data = {
            "series_id": self.series_id,
            "step": self.step,
            "bounds": {"degT": self.max_deg_t, "degS": self.max_deg_s},
            "verified": self.verified,
            "status": self.status,
        }
        if self.annihilator is not None:
            data.update(self.annihilator.to_dict())
            data["text"] = self.annihilator.to_text()
        if self.expected is not None:
            data["expected"] = self.expected
            data["matches_expected"] = self.matches_expected
        return data


FAMILY_EXPECTATIONS = {
    "plus-inverses-1": ("S**2 - S + z", 2, 1, 2),
    "plus-inverses-2": ("(1 - 16*z)*S**2 + (18*z - 1)*S - 27*z**2", 2, 2, 2),
    "product-inverse-2": ("(1 - 27*z)*S**3 + (36*z - 1)*S**2 - 8*z*S - 16*z**2", 3, 2, 3),
}


def _matches(annihilator: Optional[AnnihilatorPoly], expected: str) -> bool:
    if annihilator is None:
        return False
    return sympy.expand(annihilator.to_sympy() - sympy.sympify(expected, locals={"S": sympy.Symbol("S")})) == 0


def family_series(name: str, N: int, method: str = "auto") -> ScalarSeries:
    """P_a for one of the named example families, to t^N."""
    from spectral import char_series, plus_inverses, product_inverse

    if name == "plus-inverses-1":
        return char_series(plus_inverses(1), N, method)
    if name == "plus-inverses-2":
        return char_series(plus_inverses(2), N, method)
    if name == "product-inverse-2":
        return char_series(product_inverse(2), N, method)
    raise ValueError(f"Unknown family {name!r}")


def guess_family_evidence(name: str, margin: int = DEFAULT_MARGIN, method: str = "auto") -> EvidenceEntry:
    """Annihilator of a family's characteristic series, in z = t^step."""
    expected, max_s, max_t, step = FAMILY_EXPECTATIONS[name]
    needed = (max_t + 1) * (max_s + 1) + margin
    series = family_series(name, step * (needed - 1), method)
    compressed = series.compress(step, "z")
    annihilator = guess_annihilator(compressed, max_t, max_s, margin)
    return EvidenceEntry(series_id=name, step=step, annihilator=annihilator,
                         max_deg_t=max_t, max_deg_s=max_s, expected=expected,
                         matches_expected=_matches(annihilator, expected))


def slice_evidence(P: PolyInput, series_id: str, max_deg_t: int = 8, max_deg_s: int = 4,
                   margin: int = DEFAULT_MARGIN, slope=1) -> EvidenceEntry:
    """Guess an annihilator for a binomial transform restricted to a line."""
    needed = (max_deg_t + 1) * (max_deg_s + 1) + margin
    sliced = binomial_slice(P, needed - 1, slope)
    compressed, step = compress_series(sliced, "z")
    if step > 1:
        sliced = binomial_slice(P, step * (needed - 1), slope)
        compressed, step = compress_series(sliced, "z")
    annihilator = guess_annihilator(compressed, max_deg_t, max_deg_s, margin)
    return EvidenceEntry(series_id=series_id, step=step, annihilator=annihilator,
                         max_deg_t=max_deg_t, max_deg_s=max_deg_s)


def random_transform_polynomial(rng: random.Random, bound: int = 2, max_degree: int = 3):
    """
    A random P with P(0, 0) = 1 and total degree <= max_degree.

    Every monomial x^i y^j with 1 <= i + j <= d gets an integer coefficient
    in [-bound, bound], where d is drawn from 1..max_degree and at least
    one degree-d coefficient is nonzero.
    """
    x, y = sympy.symbols("x y")
    degree = rng.randint(1, max_degree)
    values = list(range(-bound, bound + 1))
    nonzero = [v for v in values if v]
    P = sympy.Integer(1)
    for total in range(1, degree + 1):
        coefficients = [rng.choice(values) for _ in range(total + 1)]
        if total == degree and not any(coefficients):
            coefficients[rng.randrange(total + 1)] = rng.choice(nonzero)
        for i, c in enumerate(coefficients):
            P += c * x ** i * y ** (total - i)
    return sympy.expand(P)


def transform_battery(seed: int, count: int = 10, max_deg_t: int = 8, max_deg_s: int = 8,
                      margin: int = DEFAULT_MARGIN) -> List[EvidenceEntry]:
    """
    Seeded random transforms on the diagonal, plus P = 1 - x*y.

    Cases with no annihilator inside the bounds stay in the battery with
    status "not-found".
    """
    rng = random.Random(seed)
    entries = []
    x, y = sympy.symbols("x y")
    anchor = slice_evidence(1 - x * y, "1 - x*y", max_deg_t, max_deg_s, margin)
    anchor.expected = "S**2 + (2*z - 1)*S + z**2"
    anchor.matches_expected = _matches(anchor.annihilator, anchor.expected)
    entries.append(anchor)
    for index in range(count):
        P = random_transform_polynomial(rng)
        entry = slice_evidence(P, sympy.sstr(P), max_deg_t, max_deg_s, margin)
        if not entry.verified:
            logger.warning(f"Battery case {index} ({entry.series_id}): not found with "
                           f"degT<={max_deg_t}, degS<={max_deg_s}")
        entries.append(entry)
    found = sum(entry.verified for entry in entries)
    logger.info(f"Transform battery: {found}/{len(entries)} verified")
    return entries
