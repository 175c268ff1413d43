"""
Exact Linear Algebra Helpers

Thin layer over sympy's DomainMatrix for the matrix work shared by the
expression evaluator, the dynamics harnesses and Laurent recovery:
field tags (QQ or GF(p)), random exact entries, block splitting,
nullspaces and unique solves, plus Chinese remaindering and rational
reconstruction for the multi-prime solves.
"""

import logging
import os
import random
from dataclasses import dataclass
from fractions import Fraction
from math import gcd
from typing import List, Optional, Sequence, Tuple

from sympy.ntheory.modular import crt
from sympy.polys.domains import GF, QQ
from sympy.polys.matrices import DomainMatrix

from nc_core import NcidError, to_fraction

logger = logging.getLogger(__name__)

DEFAULT_PRIMES = (2147483647, 2147483629, 2147483587)


class ReconstructionError(NcidError):
    """Raised when a residue has no small rational preimage."""


def default_primes() -> Tuple[int, ...]:
    """Prime list, overridable through NCID_PRIMES (comma separated)."""
    raw = os.getenv("NCID_PRIMES")
    if not raw:
        return DEFAULT_PRIMES
    return tuple(int(part) for part in raw.split(",") if part.strip())


@dataclass(frozen=True)
class Field:
    """Exact scalar field: the rationals, or integers modulo a prime."""

    prime: Optional[int] = None

    @classmethod
    def parse(cls, tag) -> "Field":
        """Accept 'QQ', 'Q', 'GF(p)', 'Fp', a bare prime or an existing Field."""
        if isinstance(tag, Field):
            return tag
        if isinstance(tag, int):
            return cls(tag)
        text = str(tag).strip()
        if text.upper() in ("QQ", "Q"):
            return cls(None)
        if text.upper().startswith("GF(") and text.endswith(")"):
            return cls(int(text[3:-1]))
        if text.upper().startswith("F") and text[1:].isdigit():
            return cls(int(text[1:]))
        if text.isdigit():
            return cls(int(text))
        raise ValueError(f"Unknown field tag {tag!r}")

    @property
    def is_rational(self) -> bool:
        return self.prime is None

    @property
    def domain(self):
        return QQ if self.prime is None else GF(self.prime)

    @property
    def label(self) -> str:
        return "QQ" if self.prime is None else f"GF({self.prime})"

    def element(self, value):
        """Map an exact rational into the field (division by p raises ZeroDivisionError)."""
        value = to_fraction(value)
        if self.prime is None:
            return QQ(value.numerator, value.denominator)
        K = self.domain
        if value.denominator % self.prime == 0:
            raise ZeroDivisionError(f"{value} has no image modulo {self.prime}")
        return K(value.numerator) / K(value.denominator)

    def to_exact(self, element):
        """Field element -> Fraction (QQ) or int in [0, p) (GF)."""
        if self.prime is None:
            return to_fraction(element)
        return int(element) % self.prime

    def random_element(self, rng: random.Random, bound: int = 9):
        if self.prime is None:
            return QQ(rng.randint(-bound, bound))
        return self.domain(rng.randrange(self.prime))

    def __str__(self) -> str:
        return self.label


# ---------------------------------------------------------------------------
# Matrix construction and inspection
# ---------------------------------------------------------------------------

def from_rows(rows: Sequence[Sequence], field: Field) -> DomainMatrix:
    return DomainMatrix([[field.element(v) for v in row] for row in rows],
                        (len(rows), len(rows[0]) if rows else 0), field.domain)


def identity(d: int, field: Field) -> DomainMatrix:
    return DomainMatrix.eye(d, field.domain).to_dense()


def zeros(d: int, field: Field, cols: Optional[int] = None) -> DomainMatrix:
    return DomainMatrix.zeros((d, d if cols is None else cols), field.domain).to_dense()


def scalar(value, d: int, field: Field) -> DomainMatrix:
    return identity(d, field) * field.element(value)


def random_matrix(d: int, field: Field, rng: random.Random, bound: int = 9) -> DomainMatrix:
    rows = [[field.random_element(rng, bound) for _ in range(d)] for _ in range(d)]
    return DomainMatrix(rows, (d, d), field.domain)


def is_zero(matrix: DomainMatrix) -> bool:
    return matrix.is_zero_matrix


def is_invertible(matrix: DomainMatrix) -> bool:
    return matrix.det() != matrix.domain.zero


# ---------------------------------------------------------------------------
# Blocks
# ---------------------------------------------------------------------------

def split_blocks(matrix: DomainMatrix, rows: int, cols: int, d: int) -> List[List[DomainMatrix]]:
    """Cut an (rows*d) x (cols*d) matrix into a grid of d x d blocks."""
    return [[matrix.extract(list(range(i * d, (i + 1) * d)), list(range(j * d, (j + 1) * d)))
             for j in range(cols)] for i in range(rows)]


def join_blocks(blocks: Sequence[Sequence[DomainMatrix]]) -> DomainMatrix:
    rows = [DomainMatrix.hstack(*row) if len(row) > 1 else row[0] for row in blocks]
    return DomainMatrix.vstack(*rows) if len(rows) > 1 else rows[0]


# ---------------------------------------------------------------------------
# Solving
# ---------------------------------------------------------------------------

def integer_nullspace(rows: Sequence[Sequence[Fraction]]) -> List[List[int]]:
    """
    Nullspace basis of a rational matrix, fraction-free.

    Rows are cleared of denominators and the nullspace is computed over ZZ;
    each basis vector is returned primitive (content removed).
    """
    if not rows:
        return []
    matrix = DomainMatrix([[QQ(v.numerator, v.denominator) for v in row] for row in rows],
                          (len(rows), len(rows[0])), QQ)
    _, numerators = matrix.clear_denoms_rowwise(convert=True)
    basis = numerators.nullspace()
    vectors = []
    for i in range(basis.shape[0]):
        row = basis.extract([i], list(range(basis.shape[1])))
        if row.is_zero_matrix:
            continue
        _, primitive = row.primitive()
        vectors.append([int(v) for v in primitive.to_list()[0]])
    return vectors


def solve_unique(matrix: DomainMatrix, rhs: DomainMatrix) -> Tuple[str, Optional[List]]:
    """
    Solve matrix * x = rhs over a field.

    Returns:
        ("ok", solution), ("inconsistent", None) or ("rank_deficient", None)
    """
    unknowns = matrix.shape[1]
    augmented = DomainMatrix.hstack(matrix, rhs).to_dense()
    reduced, pivots = augmented.rref()
    if unknowns in pivots:
        return "inconsistent", None
    if len(pivots) < unknowns:
        return "rank_deficient", None
    values = reduced.to_list()
    solution = [values[i][unknowns] for i in range(unknowns)]
    return "ok", solution


# ---------------------------------------------------------------------------
# Modular reconstruction
# ---------------------------------------------------------------------------

def rational_reconstruction(residue: int, modulus: int) -> Fraction:
    """
    Find r/t with r = t * residue (mod modulus) and |r|, |t| <= sqrt(modulus/2).

    Raises:
        ReconstructionError: no such fraction exists
    """
    r, old_r = residue % modulus, modulus
    t, old_t = 1, 0
    while r and 2 * r * r >= modulus:
        quotient = old_r // r
        old_r, r = r, old_r - quotient * r
        old_t, t = t, old_t - quotient * t
    if t == 0 or 2 * t * t >= modulus or gcd(r, t) != 1:
        raise ReconstructionError(f"No rational preimage for {residue} mod {modulus}")
    return Fraction(r, t)


def combine_residues(residues: Sequence[int], primes: Sequence[int]) -> Fraction:
    """CRT-combine one value known modulo several primes, then reconstruct it."""
    value, modulus = crt(list(primes), [r % p for r, p in zip(residues, primes)], symmetric=True)
    if abs(value) * abs(value) * 2 < modulus:
        return Fraction(int(value))
    return rational_reconstruction(int(value), int(modulus))
