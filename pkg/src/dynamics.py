"""
Noncommutative Discrete Dynamics

The S_l maps (X, Y) -> (X Y X^-1, (1 + Y^l) X^-1), the U_n recursions for
odd k, the Lax pair of S_-1, the bi-characteristic polynomial
det(1 - x A - y B), the involution harness for the period-3 conjecture on
3 x 3 block matrices, and degree-growth probes. All checks evaluate
exactly at sampled matrix points.
"""

import logging
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import sympy
from sympy.polys.matrices import DomainMatrix
from sympy.polys.matrices.exceptions import DMNonInvertibleMatrixError

from exact_linalg import Field, identity, is_invertible, join_blocks, random_matrix, solve_unique, split_blocks
from nc_core import BudgetExceeded, NcidError, to_fraction
from ratexpr import (
    BlockExpr,
    DegenerateSample,
    ExprGraph,
    MatrixPoint,
    RatExpr,
    SingularInverse,
    derive_seed,
    eval_expr,
    prove_zero,
    sample_point,
)

logger = logging.getLogger(__name__)

DEFAULT_T_VALUES = (Fraction(1), Fraction(2), Fraction(3), Fraction(5, 7))
MAX_RESAMPLES = 100

State = Tuple[RatExpr, ...]
Blocks = List[List[DomainMatrix]]


class SingularBlock(NcidError):
    """A block needed for normalization or an involution is singular."""

    def __init__(self, row: int, col: int):
        super().__init__(f"Singular block at ({row}, {col})")
        self.row = row
        self.col = col


# ---------------------------------------------------------------------------
# Maps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MapSpec:
    """S_l (two components) or the order-k U recursion (k components)."""

    name: str
    l: int = 1
    k: int = 3

    @classmethod
    def parse(cls, text: str) -> "MapSpec":
        """'S1', 'S2', 'S-1', 'S_minus1' or 'U3', 'U5', ..."""
        token = text.strip().replace("_minus", "-").replace("minus", "-")
        if token.upper().startswith("S"):
            l = int(token[1:])
            if l == 0:
                raise ValueError("S_0 is not a valid map")
            return cls("S", l=l)
        if token.upper().startswith("U"):
            k = int(token[1:])
            if k < 3 or k % 2 == 0:
                raise ValueError("U recursions need odd k >= 3")
            return cls("U", k=k)
        raise ValueError(f"Unknown map {text!r}")

    @property
    def label(self) -> str:
        return f"S{self.l}" if self.name == "S" else f"U{self.k}"

    @property
    def alphabet(self) -> Tuple[str, ...]:
        if self.name == "S":
            return ("X", "Y")
        return tuple(f"U{i}" for i in range(1, self.k + 1))

    def initial_state(self, graph: Optional[ExprGraph] = None) -> State:
        graph = ExprGraph() if graph is None else graph
        return tuple(graph.var(name) for name in self.alphabet)

    def step(self, state: State, n: Optional[int] = None) -> State:
        """
        One application. For U maps `n` is the index of the new term and
        selects the parity rule.
        """
        if self.name == "S":
            x, y = state
            x_inv = x.inverse()
            return (x * y * x_inv, (1 + y ** self.l) * x_inv)
        if n is None:
            raise ValueError("U recursion needs the index of the new term")
        first, second, last = state[0], state[1], state[-1]
        if n % 2 == 0:
            new = first.inverse() * (1 + last * second)
        else:
            new = (1 + second * last) * first.inverse()
        return tuple(state[1:]) + (new,)


def iterate_map(spec: MapSpec, steps: int, graph: Optional[ExprGraph] = None) -> List[State]:
    """States 0..steps as DAGs; no simplification."""
    if steps < 0:
        raise ValueError("steps must be non-negative")
    states = [spec.initial_state(graph)]
    for j in range(steps):
        states.append(spec.step(states[-1], spec.k + j + 1 if spec.name == "U" else None))
    return states


def u_sequence(k: int, upto: int, graph: Optional[ExprGraph] = None) -> List[RatExpr]:
    """[U_1, ..., U_upto] for the order-k recursion."""
    graph = ExprGraph() if graph is None else graph
    spec = MapSpec("U", k=k)
    states = iterate_map(spec, max(upto - k, 0), graph)
    terms = list(states[0])
    for state in states[1:]:
        terms.append(state[-1])
    return terms[:upto]


def recursion_residuals(spec: MapSpec, steps: int, graph: Optional[ExprGraph] = None) -> List[RatExpr]:
    """
    Inverse-free forms of the defining equations, zero at every point:
    S maps: X' X - X Y and Y' X - (1 + Y^l); U maps: the cleared recursion.
    """
    graph = ExprGraph() if graph is None else graph
    residuals = []
    if spec.name == "S":
        states = iterate_map(spec, steps, graph)
        for (x, y), (x_next, y_next) in zip(states, states[1:]):
            residuals.append(x_next * x - x * y)
            residuals.append(y_next * x - (1 + y ** spec.l))
        return residuals
    k = spec.k
    terms = u_sequence(k, k + steps, graph)
    for n in range(k + 1, k + steps + 1):
        u = lambda i: terms[i - 1]
        if n % 2 == 0:
            residuals.append(u(n - k) * u(n) - (1 + u(n - 1) * u(n - k + 1)))
        else:
            residuals.append(u(n) * u(n - k) - (1 + u(n - k + 1) * u(n - 1)))
    return residuals


# ---------------------------------------------------------------------------
# Lax pair of S_-1
# ---------------------------------------------------------------------------

def lax_matrices(t, graph: Optional[ExprGraph] = None) -> Tuple[BlockExpr, BlockExpr]:
    """L(t) and V(t) as 2 x 2 block expressions in X, Y."""
    graph = ExprGraph() if graph is None else graph
    t = to_fraction(t)
    if not t:
        raise ValueError("t must be nonzero (L(t) contains 1/t)")
    X, Y = graph.var("X"), graph.var("Y")
    Xi, Yi = X.inverse(), Y.inverse()
    s_inv = (1 + X + Y).inverse()
    q_inv = (1 + Yi).inverse()
    L = BlockExpr.grid([
        [Yi + X, t * Y + Yi * Xi + Xi + 1],
        [Yi + X * (1 / t), Y + Yi * Xi + Xi + (1 / t)],
    ])
    V = BlockExpr.grid([
        [X * s_inv * X * q_inv, t * (X * s_inv * Y)],
        [X * q_inv * X * s_inv, X * Y * s_inv],
    ])
    return L, V


def _map_grid(block: BlockExpr, mapping: Dict[str, RatExpr]) -> BlockExpr:
    from ratexpr import substitute

    return BlockExpr.grid([[substitute(e, mapping) for e in row] for row in block.entries])


def lax_residual_expr(t, graph: Optional[ExprGraph] = None) -> BlockExpr:
    """S_-1(L(t)) V(t) - V(t) L(t)."""
    graph = ExprGraph() if graph is None else graph
    L, V = lax_matrices(t, graph)
    X, Y = graph.var("X"), graph.var("Y")
    image = MapSpec("S", l=-1).step((X, Y))
    mapped = _map_grid(L, {"X": image[0], "Y": image[1]})
    return mapped * V - V * L


@dataclass
class LaxVerdict:
    d: int
    field: str
    verdict: str
    per_t: List[Dict] = field(default_factory=list)
    degeneracy_rate: float = 0.0
    witness: Optional[Dict] = None

    @property
    def is_zero(self) -> bool:
        return self.verdict == "zero-evidence"


def lax_residual(d: int, field_tag="QQ", t_values: Sequence = DEFAULT_T_VALUES,
                 trials: int = 20, seed: int = 0, graph: Optional[ExprGraph] = None) -> LaxVerdict:
    """
    Evaluate the Lax residual blockwise at `trials` points for each t.

    Raises:
        ValueError: some t is zero
    """
    if any(to_fraction(t) == 0 for t in t_values):
        raise ValueError("t = 0 is not allowed")
    graph = ExprGraph() if graph is None else graph
    field_obj = Field.parse(field_tag)
    result = LaxVerdict(d=d, field=field_obj.label, verdict="zero-evidence")
    rates = []
    for t in t_values:
        expr = lax_residual_expr(t, graph)
        verdict = prove_zero(expr, dims=[d], trials=trials, fields=[field_obj],
                             seed=derive_seed(seed, "lax", str(t)))
        rates.append(verdict.singular_rate)
        result.per_t.append({"t": str(to_fraction(t)), "verdict": verdict.verdict})
        if verdict.verdict == "nonzero":
            result.verdict = "nonzero"
            result.witness = dict(verdict.witness, t=str(to_fraction(t)))
            logger.error(f"Lax residual nonzero at t={t}, d={d}, {field_obj.label}")
        elif verdict.verdict == "all-singular" and result.verdict == "zero-evidence":
            result.verdict = "all-singular"
    result.degeneracy_rate = sum(rates) / len(rates)
    return result


def lax_spectrum_check(d: int, field_tag="QQ", t=2, seed: int = 0,
                       graph: Optional[ExprGraph] = None) -> Tuple[bool, Dict]:
    """
    Characteristic polynomial of L(t) before and after applying S_-1 at one point.
    """
    field_obj = Field.parse(field_tag)
    graph = ExprGraph() if graph is None else graph
    L, _ = lax_matrices(t, graph)
    X, Y = graph.var("X"), graph.var("Y")
    image = MapSpec("S", l=-1).step((X, Y))
    for attempt in range(MAX_RESAMPLES):
        point = sample_point(["X", "Y"], d, field_obj, derive_seed(seed, "spectrum", attempt))
        try:
            moved = MatrixPoint(field_obj, d, {"X": eval_expr(image[0], point),
                                               "Y": eval_expr(image[1], point)}, point.seed)
            before = eval_expr(L, point).charpoly()
            after = eval_expr(L, moved).charpoly()
        except SingularInverse:
            continue
        detail = {"d": d, "field": field_obj.label, "t": str(to_fraction(t)), "seed": point.seed}
        return before == after, detail
    raise DegenerateSample(MAX_RESAMPLES, "Lax spectrum point")


# ---------------------------------------------------------------------------
# Bi-characteristic polynomial
# ---------------------------------------------------------------------------

def bichar_poly(A: DomainMatrix, B: DomainMatrix, field_tag="QQ") -> sympy.Poly:
    """
    det(1 - x A - y B) by evaluation on a (d+1) x (d+1) grid and exact
    interpolation.
    """
    field_obj = Field.parse(field_tag)
    d = A.shape[0]
    if A.shape != (d, d) or B.shape != (d, d):
        raise ValueError("A and B must be square of equal size")
    A = A.convert_to(field_obj.domain)
    B = B.convert_to(field_obj.domain)
    K = field_obj.domain
    I = identity(d, field_obj)
    grid = list(range(d + 1))
    monomials = [(a, b) for a in range(d + 1) for b in range(d + 1)]
    rows, values = [], []
    for xv in grid:
        for yv in grid:
            M = I - A * K(xv) - B * K(yv)
            values.append([M.det()])
            rows.append([K(xv) ** a * K(yv) ** b for a, b in monomials])
    system = DomainMatrix(rows, (len(rows), len(monomials)), K)
    rhs = DomainMatrix(values, (len(values), 1), K)
    status, solution = solve_unique(system, rhs)
    if status != "ok":
        raise ValueError(f"Interpolation failed: {status}")
    x, y = sympy.symbols("x y")
    expr = sympy.Integer(0)
    for (a, b), value in zip(monomials, solution):
        exact = field_obj.to_exact(value)
        if exact:
            coefficient = sympy.Rational(exact.numerator, exact.denominator) if field_obj.is_rational \
                else sympy.Integer(exact)
            expr += coefficient * x ** a * y ** b
    return sympy.Poly(expr, x, y)


# ---------------------------------------------------------------------------
# Period-3 conjecture harness
# ---------------------------------------------------------------------------

def _inverse(matrix: DomainMatrix, row: int = -1, col: int = -1) -> DomainMatrix:
    try:
        return matrix.inv()
    except (DMNonInvertibleMatrixError, ZeroDivisionError) as e:
        raise SingularBlock(row, col) from e


def involution_full_inverse(M: Blocks) -> Blocks:
    """I1: invert the assembled 3d x 3d matrix."""
    d = M[0][0].shape[0]
    return split_blocks(_inverse(join_blocks(M)), 3, 3, d)


def involution_block_transpose(M: Blocks) -> Blocks:
    """I2: move blocks; entries are not transposed."""
    return [[M[j][i] for j in range(3)] for i in range(3)]


def involution_blockwise_inverse(M: Blocks) -> Blocks:
    """I3: invert every block."""
    return [[_inverse(M[i][j], i, j) for j in range(3)] for i in range(3)]


def conjecture_map(M: Blocks) -> Blocks:
    """F = I1 . I2 . I3 (I3 applied first)."""
    return involution_full_inverse(involution_block_transpose(involution_blockwise_inverse(M)))


def gauge_normalize(M: Blocks) -> Blocks:
    """
    M''_{ij} = L_i M_{ij} R_j with R_j = M_{3j}^-1, L_3 = 1, L_i = M_33 M_{i3}^-1,
    so the last block row and column become identities.

    Raises:
        SingularBlock: a boundary block is not invertible
    """
    R = [_inverse(M[2][j], 2, j) for j in range(3)]
    L = [M[2][2] * _inverse(M[i][2], i, 2) for i in range(2)]
    L.append(identity(M[0][0].shape[0], _field_of(M)))
    return [[L[i] * M[i][j] * R[j] for j in range(3)] for i in range(3)]


def _field_of(M: Blocks) -> Field:
    domain = M[0][0].domain
    if domain.is_QQ:
        return Field(None)
    return Field(int(domain.characteristic()))


def blocks_equal(N: Blocks, M: Blocks) -> bool:
    return all(N[i][j] == M[i][j] for i in range(3) for j in range(3))


def gauge_equivalent(N: Blocks, M: Blocks, rng: Optional[random.Random] = None) -> bool:
    """
    True if some invertible A has N_ij A = A M_ij for every block, the
    gauge freedom left after normalization. For d = 1 this is equality.
    """
    d = M[0][0].shape[0]
    if d == 1:
        return blocks_equal(N, M)
    field_obj = _field_of(M)
    K = field_obj.domain
    unknowns = d * d
    rows = []
    for i in range(3):
        for j in range(3):
            n_rows, m_rows = N[i][j].to_list(), M[i][j].to_list()
            for r in range(d):
                for c in range(d):
                    row = [K.zero] * unknowns
                    for k in range(d):
                        row[k * d + c] += n_rows[r][k]
                        row[r * d + k] -= m_rows[k][c]
                    rows.append(row)
    system = DomainMatrix(rows, (len(rows), unknowns), K)
    vectors = [v for v in system.nullspace().to_list() if any(v)]
    if not vectors:
        return False
    rng = rng or random.Random(0)
    for _ in range(8):
        combo = [K.zero] * unknowns
        for vector in vectors:
            weight = K(rng.randint(1, 97))
            combo = [a + weight * b for a, b in zip(combo, vector)]
        A = DomainMatrix([combo[r * d:(r + 1) * d] for r in range(d)], (d, d), K)
        if is_invertible(A):
            return True
    return False


def sample_blocks(d: int, field_obj: Field, rng: random.Random) -> Blocks:
    """3 x 3 grid of invertible d x d blocks; each block is redrawn until invertible."""
    def block() -> DomainMatrix:
        for _ in range(MAX_RESAMPLES):
            candidate = random_matrix(d, field_obj, rng)
            if is_invertible(candidate):
                return candidate
        raise DegenerateSample(MAX_RESAMPLES, "invertible block")

    return [[block() for _ in range(3)] for _ in range(3)]


@dataclass
class ConjectureTrial:
    index: int
    seed: int
    period3: bool
    f1_identity: bool
    f2_identity: bool
    involutions_ok: bool
    residual: int


@dataclass
class ConjectureReport:
    d: int
    field: str
    trials: List[ConjectureTrial] = field(default_factory=list)
    degenerate: int = 0

    @property
    def degeneracy_rate(self) -> float:
        total = len(self.trials) + self.degenerate
        return self.degenerate / total if total else 0.0

    @property
    def max_residual(self) -> int:
        return max((t.residual for t in self.trials), default=0)

    @property
    def findings(self) -> List[ConjectureTrial]:
        return [t for t in self.trials if not t.period3]

    @property
    def sanity_ok(self) -> bool:
        """F and F^2 move >= 90% of trials and every involution check holds."""
        if not self.trials:
            return False
        moved = sum(1 for t in self.trials if not t.f1_identity and not t.f2_identity)
        return moved >= 0.9 * len(self.trials) and all(t.involutions_ok for t in self.trials)


def _residual_count(N: Blocks, M: Blocks) -> int:
    return sum(1 for i in range(3) for j in range(3) if N[i][j] != M[i][j])


def period3_check(d: int, field_tag="QQ", trials: int = 25, seed: int = 0) -> ConjectureReport:
    """
    Sample 3 x 3 block matrices and compare normalize(F^3(M)) with normalize(M)
    up to the residual gauge. Nonzero residuals are findings with seeds.
    """
    field_obj = Field.parse(field_tag)
    report = ConjectureReport(d=d, field=field_obj.label)
    index = 0
    attempts = 0
    while len(report.trials) < trials:
        if attempts >= trials * MAX_RESAMPLES:
            raise DegenerateSample(attempts, "block matrix")
        trial_seed = derive_seed(seed, "period3", d, field_obj.label, attempts)
        attempts += 1
        rng = random.Random(trial_seed)
        M = sample_blocks(d, field_obj, rng)
        try:
            F1 = conjecture_map(M)
            F2 = conjecture_map(F1)
            F3 = conjecture_map(F2)
            base = gauge_normalize(M)
            n1, n2, n3 = (gauge_normalize(F) for F in (F1, F2, F3))
            involutions_ok = (
                blocks_equal(involution_full_inverse(involution_full_inverse(M)), M)
                and blocks_equal(involution_block_transpose(involution_block_transpose(M)), M)
                and blocks_equal(involution_blockwise_inverse(involution_blockwise_inverse(M)), M)
            )
        except SingularBlock as e:
            report.degenerate += 1
            logger.debug(f"Degenerate block sample {trial_seed}: {e}")
            continue
        period3 = gauge_equivalent(n3, base, rng)
        trial = ConjectureTrial(
            index=index,
            seed=trial_seed,
            period3=period3,
            f1_identity=gauge_equivalent(n1, base, rng),
            f2_identity=gauge_equivalent(n2, base, rng),
            involutions_ok=involutions_ok,
            residual=0 if period3 else _residual_count(n3, base),
        )
        if not period3:
            logger.error(f"FINDING: F^3 differs from identity at d={d}, {field_obj.label}, seed={trial_seed}")
        report.trials.append(trial)
        index += 1
    return report


# ---------------------------------------------------------------------------
# Growth
# ---------------------------------------------------------------------------

@dataclass
class OrbitEntry:
    iterate: int
    dag_size: int
    support_size: Optional[int] = None
    max_word_length: Optional[int] = None
    coefficients_in_01: Optional[bool] = None
    note: str = ""


@dataclass
class OrbitReport:
    map: str
    entries: List[OrbitEntry] = field(default_factory=list)

    @property
    def growth(self) -> List[Optional[int]]:
        return [entry.support_size for entry in self.entries]


def growth_probe(spec: MapSpec, steps: int, max_terms: int = 20000, verify: bool = False,
                 seed: int = 0, primes: Optional[Sequence[int]] = None,
                 graph: Optional[ExprGraph] = None) -> OrbitReport:
    """
    Per iterate: DAG size and, when the exact Laurent expansion fits the
    budget, the support size and longest word over all new components.
    """
    from laurent_recover import NotDivisible, RecoveryInfeasible, coefficient_set_check, recover_iterate

    states = iterate_map(spec, steps, graph)
    report = OrbitReport(map=spec.label)
    for j, state in enumerate(states):
        components = state if spec.name == "S" or j == 0 else state[-1:]
        entry = OrbitEntry(iterate=j, dag_size=sum(c.size for c in components))
        try:
            candidates = [recover_iterate(c, spec.alphabet, max_terms=max_terms, verify=verify,
                                          seed=derive_seed(seed, spec.label, j, i), primes=primes)
                          for i, c in enumerate(components)]
        except (BudgetExceeded, NotDivisible, RecoveryInfeasible) as e:
            entry.note = f"budget hit: {e}"
            logger.warning(f"growth_probe {spec.label} iterate {j}: {e}")
        else:
            entry.support_size = sum(len(c.coefficients) for c in candidates)
            entry.max_word_length = max(c.max_length for c in candidates)
            entry.coefficients_in_01 = all(coefficient_set_check(c, {0, 1})[0] for c in candidates)
        report.entries.append(entry)
    return report
