"""
Characteristic Series of Group Ring Elements

Constant-term traces of powers Tr(a^k), the trace series F_a, the
characteristic series P_a = exp(-sum Tr(a^k) t^k / k), the necklace
product formula for integer elements, and closed forms for the
a = sum_i (X_i + X_i^-1) family.

Two trace engines are provided: direct powering (meet in the middle) and
a first-passage walk solver on the Cayley tree that scales to long series.
"""

import logging
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from sympy.polys.domains import QQ
from sympy.polys.matrices import DomainMatrix

from nc_core import (
    BudgetExceeded,
    NCPoly,
    ScalarSeries,
    Word,
    poly_mul,
    reduce_word,
    to_fraction,
    trace_const,
    trace_of_product,
    word_key,
    word_mul,
)

logger = logging.getLogger(__name__)

DEFAULT_MAX_TERMS = 200000
DEFAULT_NECKLACE_BUDGET = 2000000
DEFAULT_MAX_SUPPORT = 8


@dataclass
class NecklaceTerm:
    """One aperiodic support sequence whose product is the identity."""

    words: Tuple[Word, ...]
    coefficient: Fraction

    @property
    def length(self) -> int:
        return len(self.words)


# ---------------------------------------------------------------------------
# Example families
# ---------------------------------------------------------------------------

def plus_inverses(n: int) -> NCPoly:
    """a = X_1 + X_1^-1 + ... + X_n + X_n^-1."""
    if n < 1:
        raise ValueError("n must be at least 1")
    terms = {}
    for i in range(1, n + 1):
        terms[(i,)] = 1
        terms[(-i,)] = 1
    return NCPoly(terms)


def product_inverse(n: int) -> NCPoly:
    """a = X_1 + ... + X_n + (X_1 ... X_n)^-1."""
    if n < 1:
        raise ValueError("n must be at least 1")
    terms = {(i,): 1 for i in range(1, n + 1)}
    inverse = tuple(-i for i in range(n, 0, -1))
    terms[inverse] = terms.get(inverse, 0) + 1
    return NCPoly(terms)


def random_element(rng: random.Random, n: int = 2, max_support: int = 4, max_length: int = 2,
                   bound: int = 3) -> NCPoly:
    """Seeded integer element: up to max_support reduced words of length <= max_length."""
    letters = [letter for i in range(1, n + 1) for letter in (i, -i)]
    terms: Dict[Word, int] = {}
    while not terms:
        for _ in range(rng.randint(1, max_support)):
            length = rng.randint(0, max_length)
            word = reduce_word(rng.choice(letters) for _ in range(length))
            terms[word] = rng.choice([v for v in range(-bound, bound + 1) if v])
    return NCPoly(terms)


# ---------------------------------------------------------------------------
# Trace engines
# ---------------------------------------------------------------------------

def power_traces(a: NCPoly, K: int, max_terms: int = DEFAULT_MAX_TERMS) -> List[Fraction]:
    """
    [Tr(a^1), ..., Tr(a^K)] by direct powering.

    Only a^1..a^ceil(K/2) are formed; Tr(a^k) is read off as the trace of
    the product of two half powers.

    Raises:
        BudgetExceeded: an intermediate power has more than max_terms words
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    half = (K + 1) // 2
    powers = [NCPoly.one(), a]
    while len(powers) <= half:
        nxt = poly_mul(powers[-1], a)
        if len(nxt) > max_terms:
            raise BudgetExceeded(f"a^{len(powers)} support", max_terms)
        powers.append(nxt)
    traces = []
    for k in range(1, K + 1):
        hi, lo = (k + 1) // 2, k // 2
        traces.append(trace_of_product(powers[hi], powers[lo]))
    logger.debug(f"power_traces: K={K}, largest power has {len(powers[-1])} words")
    return traces


class _WalkSystem:
    """
    Letter-level automaton for walks on the Cayley tree.

    State 0 sits between support words; state (w, i) is inside word w after
    its first i letters. T[h][j] is the transition matrix on letter h at
    z-order j (z marks the first letter of every word); loop[1] carries the
    constant term.
    """

    def __init__(self, a: NCPoly):
        words = [(w, c) for w, c in a.items() if w]
        index: Dict[Tuple[Word, int], int] = {}
        for word, _ in words:
            for i in range(1, len(word)):
                index[(word, i)] = len(index) + 1
        self.size = len(index) + 1
        self.letters = sorted({l for word, _ in words for l in word} |
                              {-l for word, _ in words for l in word}, key=abs)
        entries: Dict[Tuple[int, int], Dict[Tuple[int, int], Fraction]] = {}

        def put(letter, order, row, col, value):
            cell = entries.setdefault((letter, order), {})
            cell[(row, col)] = cell.get((row, col), 0) + value

        for word, coef in words:
            last = len(word) - 1
            put(word[0], 1, 0, index[(word, 1)] if last else 0, coef)
            for i in range(1, len(word)):
                target = index[(word, i + 1)] if i < last else 0
                put(word[i], 0, index[(word, i)], target, Fraction(1))

        self.T: Dict[int, List[Optional[DomainMatrix]]] = {}
        for letter in self.letters:
            self.T[letter] = [self._matrix(entries.get((letter, order), {})) for order in (0, 1)]
        constant = trace_const(a)
        self.loop = [None, self._matrix({(0, 0): constant}) if constant else None]
        self.max_length = max((len(w) for w, _ in words), default=1)

    def _matrix(self, cells: Dict[Tuple[int, int], Fraction]) -> Optional[DomainMatrix]:
        if not cells:
            return None
        rows = [[QQ(0)] * self.size for _ in range(self.size)]
        for (r, c), v in cells.items():
            rows[r][c] = QQ(v.numerator, v.denominator)
        return DomainMatrix(rows, (self.size, self.size), QQ)

    def t(self, letter: int, order: int) -> Optional[DomainMatrix]:
        if order > 1:
            return None
        return self.T[letter][order]


def _add(a: Optional[DomainMatrix], b: Optional[DomainMatrix]) -> Optional[DomainMatrix]:
    if a is None:
        return b
    if b is None:
        return a
    return a + b


def _mul(a: Optional[DomainMatrix], b: Optional[DomainMatrix]) -> Optional[DomainMatrix]:
    if a is None or b is None:
        return None
    return a * b


def _same(a: Optional[DomainMatrix], b: Optional[DomainMatrix]) -> bool:
    if a is None or b is None:
        return (a is None or a.is_zero_matrix) and (b is None or b.is_zero_matrix)
    return a == b


def return_traces(a: NCPoly, K: int) -> List[Fraction]:
    """
    [Tr(a^1), ..., Tr(a^K)] by first-passage decomposition on the Cayley tree.

    F_g collects walks that first reach the neighbour in direction g:
        F_g = T_g + (loop + sum_{h != g} T_h F_{h^-1}) F_g
    and returns to the root are G = sum_n M^n with M = loop + sum_h T_h F_{h^-1}.
    Both are solved order by order in z; Tr(a^k) is G[0,0] at order k.
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    system = _WalkSystem(a)
    letters = system.letters
    cap = 4 * system.max_length + 8
    F: Dict[int, List[Optional[DomainMatrix]]] = {g: [] for g in letters}
    # excursions that avoid direction g, per z-order
    M_excl: Dict[int, List[Optional[DomainMatrix]]] = {g: [] for g in letters}

    def excursion(g_excluded: Optional[int], order: int) -> Optional[DomainMatrix]:
        acc = system.loop[order] if order < 2 else None
        for h in letters:
            if h == g_excluded:
                continue
            for i in (0, 1):
                if i > order:
                    continue
                acc = _add(acc, _mul(system.t(h, i), F[-h][order - i]))
        return acc

    for k in range(K + 1):
        fixed = {}
        for g in letters:
            acc = system.t(g, k)
            for j in range(1, k):
                acc = _add(acc, _mul(M_excl[g][j], F[g][k - j]))
            fixed[g] = acc
        for g in letters:
            F[g].append(None)
        for _ in range(cap):
            changed = False
            current = {}
            for g in letters:
                m_k = excursion(g, k)
                value = fixed[g]
                if k > 0:
                    value = _add(value, _mul(m_k, F[g][0]))
                    value = _add(value, _mul(M_excl[g][0], F[g][k]))
                else:
                    value = _add(value, _mul(m_k, F[g][0]))
                current[g] = value
            for g in letters:
                if not _same(current[g], F[g][k]):
                    changed = True
                F[g][k] = current[g]
            if not changed:
                break
        else:
            raise BudgetExceeded(f"first-passage fixpoint at order {k}", cap)
        for g in letters:
            M_excl[g].append(excursion(g, k))

    M = [excursion(None, j) for j in range(K + 1)]
    start = DomainMatrix([[QQ(1)] + [QQ(0)] * (system.size - 1)], (1, system.size), QQ)
    rows: List[Optional[DomainMatrix]] = []
    traces = []
    for k in range(K + 1):
        fixed = start if k == 0 else None
        for j in range(1, k + 1):
            fixed = _add(fixed, _mul(rows[k - j], M[j]))
        row = fixed
        for _ in range(cap):
            nxt = _add(fixed, _mul(row, M[0]))
            if _same(nxt, row):
                break
            row = nxt
        else:
            raise BudgetExceeded(f"return-series fixpoint at order {k}", cap)
        rows.append(row)
        if k:
            traces.append(Fraction(0) if row is None else to_fraction(row.to_list()[0][0]))
    logger.debug(f"return_traces: K={K}, {system.size} automaton states")
    return traces


def traces(a: NCPoly, K: int, method: str = "auto", max_terms: int = DEFAULT_MAX_TERMS) -> List[Fraction]:
    """Dispatch between the direct and walk trace engines."""
    if method == "direct":
        return power_traces(a, K, max_terms)
    if method == "walk":
        return return_traces(a, K)
    if method != "auto":
        raise ValueError(f"Unknown trace method {method!r}")
    estimate = max(len(a), 1) ** ((K + 1) // 2)
    if estimate <= max_terms // 10:
        return power_traces(a, K, max_terms)
    return return_traces(a, K)


# ---------------------------------------------------------------------------
# Series
# ---------------------------------------------------------------------------

def f_series(a: NCPoly, N: int, method: str = "auto") -> ScalarSeries:
    """F_a(t) = sum_{k=1..N} Tr(a^k) t^k."""
    values = [Fraction(0)] + (traces(a, N, method) if N >= 1 else [])
    return ScalarSeries.from_list(values, "t", N)


def char_series_from_traces(values: Sequence[Fraction], N: int) -> ScalarSeries:
    """
    P with t P' = -F P, P(0) = 1, from F's coefficients.

    k P_k = -sum_{j=1..k} Tr(a^j) P_{k-j}
    """
    coeffs = [Fraction(1)]
    for k in range(1, N + 1):
        total = sum((values[j - 1] * coeffs[k - j] for j in range(1, k + 1)), Fraction(0))
        coeffs.append(-total / k)
    return ScalarSeries.from_list(coeffs, "t", N)


def char_series(a: NCPoly, N: int, method: str = "auto") -> ScalarSeries:
    """P_a = exp(-sum_{k>=1} Tr(a^k) t^k / k), truncated at t^N."""
    if N < 1:
        raise ValueError("N must be at least 1")
    return char_series_from_traces(traces(a, N, method), N)


def differential_residual(P: ScalarSeries, F: ScalarSeries) -> ScalarSeries:
    """t P' + F P; identically zero when P is the characteristic series of F."""
    return P.euler() + F * P


def necklace_terms(a: NCPoly, N: int, budget: int = DEFAULT_NECKLACE_BUDGET,
                   max_support: int = DEFAULT_MAX_SUPPORT) -> List[NecklaceTerm]:
    """
    All Lyndon sequences over the support (ordered by word_key) of length <= N
    whose product reduces to the identity.

    The search runs over prenecklaces; a branch is cut when the reduced
    prefix product is too long to cancel within the remaining letters.
    """
    support = sorted(a.support(), key=word_key)
    if len(support) > max_support:
        raise BudgetExceeded("necklace support size", max_support)
    coefs = [a.coefficient(w) for w in support]
    longest = max((len(w) for w in support), default=0)
    found: List[NecklaceTerm] = []
    seq: List[int] = []
    visited = 0

    def walk(product: Word, period: int) -> None:
        nonlocal visited
        visited += 1
        if visited > budget:
            raise BudgetExceeded("necklace enumeration", budget)
        depth = len(seq)
        if depth and period == depth and not product:
            coefficient = Fraction(1)
            for i in seq:
                coefficient *= coefs[i]
            found.append(NecklaceTerm(tuple(support[i] for i in seq), coefficient))
        if depth == N:
            return
        start = seq[depth - period] if depth else 0
        for symbol in range(start, len(support)):
            nxt = word_mul(product, support[symbol])
            if len(nxt) > (N - depth - 1) * longest:
                continue
            seq.append(symbol)
            walk(nxt, period if depth and symbol == start else depth + 1)
            seq.pop()

    walk((), 0)
    logger.debug(f"necklace_terms: {len(found)} terms from {visited} prefixes")
    return found


def necklace_product(a: NCPoly, N: int, budget: int = DEFAULT_NECKLACE_BUDGET,
                     max_support: int = DEFAULT_MAX_SUPPORT) -> ScalarSeries:
    """
    P_a as the product over necklace terms of (1 - c_{g1}...c_{gk} t^k).

    Raises:
        ValueError: a has non-integer coefficients
        BudgetExceeded: support or enumeration too large
    """
    if a.scalar_domain != "ZZ":
        raise ValueError("necklace_product needs integer coefficients")
    coeffs = [Fraction(0)] * (N + 1)
    coeffs[0] = Fraction(1)
    for term in necklace_terms(a, N, budget, max_support):
        k, c = term.length, term.coefficient
        for i in range(N, k - 1, -1):
            coeffs[i] -= c * coeffs[i - k]
    return ScalarSeries.from_list(coeffs, "t", N)


def closed_form_plus_inverses(n: int, N: int) -> ScalarSeries:
    """
    ((f+1)/2)^n / ((n f + n - 1)/(2n - 1))^(n-1) with f = sqrt(1 - 4(2n-1) t^2).
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    radicand = ScalarSeries.from_list([1, 0, -4 * (2 * n - 1)], "t", N)
    f = radicand.sqrt()
    numerator = ((f + 1) * Fraction(1, 2)) ** n
    denominator = (f * n + (n - 1)) * Fraction(1, 2 * n - 1)
    return numerator * denominator.inverse() ** (n - 1)


@dataclass
class SpectralReport:
    """Everything the charpoly command reports for one element."""

    input: str
    N: int
    traces: List[Fraction]
    P_coefficients: List[Fraction]
    differential_ok: bool
    integral: bool
    necklace_match: Optional[bool] = None
    closed_form_match: Optional[bool] = None
    notes: List[str] = field(default_factory=list)


def analyze(a: NCPoly, N: int, method: str = "auto", plus_inverses_n: Optional[int] = None,
            necklace_order: Optional[int] = None,
            necklace_budget: int = DEFAULT_NECKLACE_BUDGET) -> SpectralReport:
    """Traces, P_a, the differential identity and the available cross-checks."""
    values = traces(a, N, method)
    F = ScalarSeries.from_list([Fraction(0)] + values, "t", N)
    P = char_series_from_traces(values, N)
    report = SpectralReport(
        input=a.to_text(),
        N=N,
        traces=values,
        P_coefficients=P.coefficients(),
        differential_ok=differential_residual(P, F).is_zero,
        integral=P.is_integral(),
    )
    if a.scalar_domain == "ZZ":
        upto = min(N, necklace_order if necklace_order is not None else N)
        try:
            product = necklace_product(a, upto, necklace_budget)
            report.necklace_match = product.agrees_with(P, upto)
        except BudgetExceeded as e:
            logger.warning(f"Necklace cross-check skipped: {e}")
            report.notes.append(str(e))
    if plus_inverses_n is not None:
        closed = closed_form_plus_inverses(plus_inverses_n, N)
        report.closed_form_match = closed.agrees_with(P, N)
    logger.info(f"charpoly {report.input}: N={N}, integral={report.integral}")
    return report
