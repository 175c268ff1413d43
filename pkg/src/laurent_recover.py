"""
Laurent Recovery

Two routes from a rational expression to a noncommutative Laurent
polynomial in Z<X_i^{+-1}>:

- black-box: solve sum_w c_w w(p) = target(p) over stacked matrix samples
  modulo two primes, CRT + rational reconstruction, then verify over QQ
  on fresh samples;
- exact: evaluate the DAG in the group ring, resolving each inverse of a
  non-monomial by exact division under the Magnus ordering of the free group.
"""

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cmp_to_key, lru_cache
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple, Union

from sympy.polys.matrices import DomainMatrix

from exact_linalg import Field, ReconstructionError, combine_residues, default_primes, solve_unique
from nc_core import BudgetExceeded, NCPoly, NcidError, Word, format_scalar, format_word, word_inverse, word_key, word_mul
from ratexpr import (
    DegenerateSample,
    MatrixPoint,
    RatExpr,
    SingularInverse,
    derive_seed,
    eval_expr,
    sample_point,
)

logger = logging.getLogger(__name__)

DEFAULT_MAX_WORDS = 60000
DEFAULT_MAX_TERMS = 20000
DEFAULT_L_CAP = 10
FRESH_SAMPLES = 3
MAX_RESAMPLES = 100


class NotDivisible(NcidError):
    """Exact division in the group ring left a remainder."""


class RecoveryInfeasible(NcidError):
    """No unique Laurent candidate at this degree bound and schedule."""

    def __init__(self, reason: str, L: int):
        super().__init__(f"Recovery infeasible at L={L}: {reason}")
        self.reason = reason
        self.L = L


# ---------------------------------------------------------------------------
# Words
# ---------------------------------------------------------------------------

def _alphabet_size(alphabet: Union[int, Sequence[str]]) -> int:
    return alphabet if isinstance(alphabet, int) else len(alphabet)


def enumerate_words(alphabet: Union[int, Sequence[str]], L: int, monoid: bool = False) -> List[Word]:
    """
    All reduced words of length <= L, length-lex ordered.

    Args:
        alphabet: number of generators or their names
        L: length bound
        monoid: positive letters only
    """
    if L < 0:
        raise ValueError("L must be non-negative")
    n = _alphabet_size(alphabet)
    letters = [i for i in range(1, n + 1)] if monoid else \
        [letter for i in range(1, n + 1) for letter in (i, -i)]
    words: List[Word] = [()]
    layer: List[Word] = [()]
    for _ in range(L):
        layer = [w + (letter,) for w in layer for letter in letters if not w or w[-1] != -letter]
        words.extend(layer)
    return words


def word_count(n: int, L: int) -> int:
    """1 + sum_{l=1..L} 2n (2n-1)^(l-1)."""
    return 1 + sum(2 * n * (2 * n - 1) ** (l - 1) for l in range(1, L + 1))


# ---------------------------------------------------------------------------
# Magnus ordering and exact division
# ---------------------------------------------------------------------------

@lru_cache(maxsize=65536)
def _magnus_expansion(word: Word, depth: int) -> Dict[Tuple[int, ...], int]:
    """X_i -> 1 + a_i, X_i^-1 -> sum_k (-a_i)^k, truncated at total degree `depth`."""
    if not word:
        return {(): 1}
    head = _magnus_expansion(word[:-1], depth)
    letter = word[-1]
    index = abs(letter)
    factor = {(): 1, (index,): 1} if letter > 0 else \
        {(index,) * k: (-1) ** k for k in range(depth + 1)}
    result: Dict[Tuple[int, ...], int] = {}
    for mono, coef in head.items():
        for extra, weight in factor.items():
            if len(mono) + len(extra) > depth:
                continue
            key = mono + extra
            result[key] = result.get(key, 0) + coef * weight
    return {m: c for m, c in result.items() if c}


def magnus_key(word: Word, depth: int) -> Tuple[Tuple[Tuple[int, ...], int], ...]:
    """Nonzero Magnus coefficients up to `depth`, graded then lexicographic."""
    expansion = _magnus_expansion(tuple(word), depth)
    return tuple(sorted(expansion.items(), key=lambda item: (len(item[0]), item[0])))


def magnus_compare(u: Word, v: Word) -> int:
    """
    Bi-invariant total order on the free group: the first differing Magnus
    coefficient (lowest degree, then lex) decides.
    """
    if u == v:
        return 0
    for depth in range(1, len(u) + len(v) + 1):
        left = _magnus_expansion(u, depth)
        right = _magnus_expansion(v, depth)
        monomials = sorted(set(left) | set(right), key=lambda m: (len(m), m))
        for mono in monomials:
            diff = left.get(mono, 0) - right.get(mono, 0)
            if diff:
                return 1 if diff > 0 else -1
    raise AssertionError(f"Magnus expansion failed to separate {u} and {v}")


_MAGNUS = cmp_to_key(magnus_compare)


def leading_term(poly: NCPoly) -> Tuple[Word, Fraction]:
    if poly.is_zero:
        raise ValueError("Zero has no leading term")
    return max(poly.items(), key=lambda item: _MAGNUS(item[0]))


def divide_exact(A: NCPoly, B: NCPoly, side: str = "right", max_steps: int = DEFAULT_MAX_TERMS) -> NCPoly:
    """
    Q with Q * B = A (side="right") or B * Q = A (side="left").

    Raises:
        NotDivisible: a remainder survives
        BudgetExceeded: more than max_steps quotient terms
    """
    if B.is_zero:
        raise ZeroDivisionError("Division by zero in the group ring")
    if side not in ("left", "right"):
        raise ValueError(f"Unknown side {side!r}")
    lead_word, lead_coef = leading_term(B)
    lead_inverse = word_inverse(lead_word)
    quotient: Dict[Word, Fraction] = {}
    remainder = A
    steps = 0
    while not remainder.is_zero:
        steps += 1
        if steps > max_steps:
            raise BudgetExceeded("division steps", max_steps)
        word, coef = leading_term(remainder)
        q_word = word_mul(word, lead_inverse) if side == "right" else word_mul(lead_inverse, word)
        if q_word in quotient:
            raise NotDivisible(f"Quotient term {q_word} repeated; remainder does not vanish")
        q_coef = coef / lead_coef
        quotient[q_word] = q_coef
        term = NCPoly.word(q_word, q_coef)
        remainder = remainder - (term * B if side == "right" else B * term)
    return NCPoly(quotient)


# ---------------------------------------------------------------------------
# Exact expansion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Pending:
    """Inverse of a group ring element awaiting a neighbouring factor."""

    denominator: NCPoly


def _check_budget(poly: NCPoly, max_terms: int) -> NCPoly:
    if len(poly) > max_terms:
        raise BudgetExceeded("terms", max_terms)
    return poly


def _product(left, right, max_terms: int):
    if isinstance(left, NCPoly) and isinstance(right, NCPoly):
        return _check_budget(left * right, max_terms)
    if isinstance(left, _Pending) and isinstance(right, _Pending):
        return _Pending(_check_budget(right.denominator * left.denominator, max_terms))
    if isinstance(left, _Pending):
        return _check_budget(divide_exact(right, left.denominator, "left", max_terms), max_terms)
    return _check_budget(divide_exact(left, right.denominator, "right", max_terms), max_terms)


def expand_laurent(expr: RatExpr, names: Sequence[str], max_terms: int = DEFAULT_MAX_TERMS) -> NCPoly:
    """
    Group ring value of an expression whose inverses are of monomials or
    are absorbed by an adjacent product.

    Raises:
        NotDivisible: an inverse is left unresolved or a division fails
        BudgetExceeded: an intermediate exceeds max_terms
    """
    index = {name: i + 1 for i, name in enumerate(names)}
    nodes = expr.graph.nodes
    values: Dict[int, Union[NCPoly, _Pending]] = {}
    for node_id in expr.reachable():
        node = nodes[node_id]
        kind = node[0]
        if kind == "var":
            if node[1] not in index:
                raise ValueError(f"Variable {node[1]} is not in the alphabet")
            value = NCPoly.generator(index[node[1]])
        elif kind == "const":
            value = NCPoly.constant(node[1])
        elif kind == "inv":
            operand = values[node[1]]
            if isinstance(operand, _Pending):
                value = operand.denominator
            elif operand.is_monomial:
                value = operand ** -1
            else:
                value = _Pending(operand)
        elif kind == "mul":
            value = _product(values[node[1]], values[node[2]], max_terms)
        else:
            operands = [values[child] for child in node[1:]]
            if any(isinstance(op, _Pending) for op in operands):
                raise NotDivisible(f"Unresolved inverse under {kind} at node {node_id}")
            value = _check_budget(operands[0] + operands[1] if kind == "add" else -operands[0], max_terms)
        values[node_id] = value
    result = values[expr.id]
    if isinstance(result, _Pending):
        raise NotDivisible("Expression is the inverse of a non-monomial")
    return result


# ---------------------------------------------------------------------------
# Candidates
# ---------------------------------------------------------------------------

@dataclass
class LaurentCandidate:
    alphabet: Tuple[str, ...]
    L: int
    coefficients: Dict[Word, Fraction]
    verified: bool = False
    report: Dict = field(default_factory=dict)
    min_full_rank_d: Optional[int] = None
    target_hash: str = ""

    @property
    def max_length(self) -> int:
        return max((len(w) for w in self.coefficients), default=0)

    def to_ncpoly(self) -> NCPoly:
        return NCPoly(self.coefficients)

    def to_dict(self, allowed: Optional[Set] = None) -> Dict:
        poly = self.to_ncpoly()
        data = {
            "target_hash": self.target_hash,
            "L": self.L,
            "support": [[format_word(w, self.alphabet), format_scalar(c)] for w, c in poly.items()],
            "verified": self.verified,
            "min_full_rank_d": self.min_full_rank_d,
            "report": self.report,
        }
        if allowed is not None:
            ok, _ = coefficient_set_check(self, allowed)
            data["coefficient_set"] = {"allowed": sorted(str(a) for a in allowed), "ok": ok}
        return data


def coefficient_set_check(candidate: LaurentCandidate, allowed: Set) -> Tuple[bool, List[Tuple[Word, Fraction]]]:
    """
    Args:
        allowed: a set of scalars, or {"ZZ"} for integrality
    """
    if "ZZ" in allowed:
        offenders = [(w, c) for w, c in candidate.coefficients.items() if c.denominator != 1]
    else:
        values = {Fraction(a) for a in allowed}
        offenders = [(w, c) for w, c in candidate.coefficients.items() if c not in values]
    return not offenders, sorted(offenders, key=lambda item: word_key(item[0]))


def _word_matrices(words: Iterable[Word], point: MatrixPoint, alphabet: Sequence[str]) -> Dict[Word, DomainMatrix]:
    """Word values, each built from its prefix."""
    field_obj, d = point.field, point.d
    letters: Dict[int, DomainMatrix] = {}
    for i, name in enumerate(alphabet, start=1):
        letters[i] = point.matrices[name]
    cache: Dict[Word, DomainMatrix] = {(): DomainMatrix.eye(d, field_obj.domain).to_dense()}

    def value(word: Word) -> DomainMatrix:
        if word not in cache:
            letter = word[-1]
            if letter not in letters:
                letters[letter] = letters[-letter].inv()
            cache[word] = value(word[:-1]) * letters[letter]
        return cache[word]

    return {w: value(w) for w in words}


def _sample(target: RatExpr, alphabet: Sequence[str], d: int, field_obj: Field, seed: int,
            slot: Tuple, group_vars: Sequence[str]) -> Tuple[MatrixPoint, DomainMatrix]:
    for attempt in range(MAX_RESAMPLES):
        try:
            point = sample_point(alphabet, d, field_obj, derive_seed(seed, *slot, attempt), group_vars)
            return point, eval_expr(target, point)
        except (SingularInverse, DegenerateSample) as e:
            logger.debug(f"Resampling {slot}: {e}")
    raise DegenerateSample(MAX_RESAMPLES, f"target evaluation at {slot}")


def _solve_modular(target: RatExpr, alphabet: Sequence[str], words: List[Word], d: int, samples: int,
                   prime: int, seed: int, group_vars: Sequence[str], L: int) -> List[int]:
    field_obj = Field(prime)
    K = field_obj.domain
    rows, rhs = [], []
    for i in range(samples):
        point, value = _sample(target, alphabet, d, field_obj, seed, ("fit", d, i), group_vars)
        matrices = _word_matrices(words, point, alphabet)
        entries = [matrices[w].to_list() for w in words]
        target_rows = value.to_list()
        for r in range(d):
            for c in range(d):
                rows.append([entry[r][c] for entry in entries])
                rhs.append([target_rows[r][c]])
    status, solution = solve_unique(DomainMatrix(rows, (len(rows), len(words)), K),
                                    DomainMatrix(rhs, (len(rhs), 1), K))
    if status != "ok":
        raise RecoveryInfeasible(status, L)
    return [field_obj.to_exact(v) for v in solution]


def verify_candidate(target: RatExpr, candidate: NCPoly, alphabet: Sequence[str], dims: Sequence[int],
                     samples: int = FRESH_SAMPLES, seed: int = 0,
                     group_vars: Optional[Sequence[str]] = None) -> Dict:
    """Compare candidate and target over QQ at fresh points; residuals are zero/nonzero flags."""
    from ratexpr import from_ncpoly

    group_vars = list(alphabet) if group_vars is None else list(group_vars)
    expr = from_ncpoly(candidate, alphabet, target.graph)
    residuals = []
    for d in dims:
        for i in range(samples):
            point, value = _sample(target, alphabet, d, Field(None), seed, ("verify", d, i), group_vars)
            zero = (eval_expr(expr, point) - value).is_zero_matrix
            residuals.append({"d": d, "seed": point.seed, "zero": zero})
    return {
        "dims": list(dims),
        "field": "QQ",
        "residuals": residuals,
        "all_zero": all(r["zero"] for r in residuals),
    }


def recover_laurent(target: RatExpr, alphabet: Sequence[str], L: int, schedule: Optional[Sequence[int]] = None,
                    support: Optional[Sequence[Word]] = None, max_words: int = DEFAULT_MAX_WORDS,
                    monoid: bool = False, seed: int = 0, primes: Optional[Sequence[int]] = None) -> LaurentCandidate:
    """
    Black-box recovery at degree bound L.

    Args:
        schedule: dimensions to try in increasing order; each below
                  ceil((L+2)/2) is skipped
        support: explicit candidate words instead of all reduced words
        monoid: positive words only (target still evaluated with invertible samples)

    Raises:
        RecoveryInfeasible: inconsistent system, rank deficiency at every
                            dimension, or no small rational preimage
        BudgetExceeded: more than max_words candidate words
    """
    alphabet = tuple(alphabet)
    words = list(support) if support is not None else enumerate_words(alphabet, L, monoid)
    if len(words) > max_words:
        raise BudgetExceeded("words", max_words)
    bound = math.ceil((L + 2) / 2)
    dims = sorted(d for d in (schedule or [bound, bound + 1]) if d >= bound) or [bound]
    primes = list(primes or default_primes())[:2]
    group_vars = list(alphabet)

    residues: Optional[List[List[int]]] = None
    chosen_d = None
    for d in dims:
        samples = math.ceil(len(words) / (d * d)) + 2
        try:
            residues = [_solve_modular(target, alphabet, words, d, samples, p, derive_seed(seed, p),
                                       group_vars, L) for p in primes]
        except RecoveryInfeasible as e:
            if e.reason == "rank_deficient":
                logger.debug(f"Rank deficient at d={d}, L={L}; raising d")
                continue
            raise
        chosen_d = d
        break
    if residues is None:
        raise RecoveryInfeasible("rank_deficient", L)

    coefficients: Dict[Word, Fraction] = {}
    try:
        for i, word in enumerate(words):
            value = combine_residues([r[i] for r in residues], primes)
            if value:
                coefficients[word] = value
    except ReconstructionError as e:
        raise RecoveryInfeasible(f"reconstruction: {e}", L) from e

    candidate = LaurentCandidate(alphabet, L, coefficients, min_full_rank_d=chosen_d, target_hash=target.digest())
    poly = candidate.to_ncpoly()
    qq_check = verify_candidate(target, poly, alphabet, [chosen_d], samples=1,
                                seed=derive_seed(seed, "qq"), group_vars=group_vars)
    if not qq_check["all_zero"]:
        raise RecoveryInfeasible("modular solution fails over QQ", L)
    fresh = verify_candidate(target, poly, alphabet, [chosen_d, chosen_d + 1],
                             seed=derive_seed(seed, "fresh"), group_vars=group_vars)
    candidate.verified = fresh["all_zero"]
    candidate.report = dict(fresh, primes=primes, words=len(words))
    logger.info(f"Recovered {len(coefficients)} terms at L={L}, d={chosen_d}, verified={candidate.verified}")
    return candidate


def syntactic_degree(expr: RatExpr) -> int:
    """Upper estimate of word length: mul adds, add takes the max, inv keeps."""
    nodes = expr.graph.nodes
    degree: Dict[int, int] = {}
    for node_id in expr.reachable():
        node = nodes[node_id]
        kind = node[0]
        if kind == "var":
            degree[node_id] = 1
        elif kind == "const":
            degree[node_id] = 0
        elif kind == "mul":
            degree[node_id] = degree[node[1]] + degree[node[2]]
        elif kind == "add":
            degree[node_id] = max(degree[node[1]], degree[node[2]])
        else:
            degree[node_id] = degree[node[1]]
    return degree[expr.id]


def recover_with_escalation(target: RatExpr, alphabet: Sequence[str], L: Optional[int] = None,
                            cap: int = DEFAULT_L_CAP, primes: Optional[Sequence[int]] = None,
                            **kwargs) -> LaurentCandidate:
    """Start at L (default: syntactic degree, capped), raise by 2 while inconsistent."""
    L = min(syntactic_degree(target), cap) if L is None else L
    while True:
        try:
            return recover_laurent(target, alphabet, L, primes=primes, **kwargs)
        except RecoveryInfeasible as e:
            if e.reason != "inconsistent" or L + 2 > cap:
                raise
            logger.info(f"Inconsistent at L={L}; trying L={L + 2}")
            L += 2


def recover_iterate(target: RatExpr, alphabet: Sequence[str], max_terms: int = DEFAULT_MAX_TERMS,
                    max_words: int = 2000, verify: bool = True, seed: int = 0,
                    primes: Optional[Sequence[int]] = None) -> LaurentCandidate:
    """
    Recovery for map iterates: enumerated words while their count stays
    within max_words, otherwise the support of the exact expansion. The
    exact expansion is always tried first to bound L.
    """
    alphabet = tuple(alphabet)
    poly = expand_laurent(target, alphabet, max_terms)
    L = poly.degree if not poly.is_zero else 0
    if not verify:
        return LaurentCandidate(alphabet, L, dict(poly.items()), target_hash=target.digest())
    support = None if word_count(len(alphabet), L) <= max_words else poly.support()
    return recover_laurent(target, alphabet, L, support=support, max_words=max(max_words, len(poly)),
                           seed=seed, primes=primes)
