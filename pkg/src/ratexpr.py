"""
Noncommutative Rational Expressions

Expressions over noncommuting variables are stored as a hash-consed DAG
(structurally equal subexpressions share one node id). The module parses
and prints the text grammar, builds block matrices of expressions, samples
exact matrix points over QQ or GF(p) and evaluates expressions there, and
runs randomized identity tests with reproducible witnesses.

Grammar:
    expr    := term (('+' | '-') term)*
    term    := unary ('*' unary)*
    unary   := '-' unary | postfix
    postfix := atom ('^' ['-'] INT)*
    atom    := IDENT | INT ['/' INT] | '(' expr ')'
    block   := '[' row (',' row)* ']'   row := '[' expr (',' expr)* ']'
"""

import hashlib
import logging
import random
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from sympy.polys.matrices import DomainMatrix
from sympy.polys.matrices.exceptions import DMNonInvertibleMatrixError

from exact_linalg import Field, is_invertible, join_blocks, random_matrix, scalar, split_blocks
from nc_core import NCPoly, NcidError, format_scalar, to_fraction

logger = logging.getLogger(__name__)

MAX_RESAMPLES = 100


class ParseError(NcidError):
    """Syntax error in expression text, with the offending offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class SingularInverse(NcidError):
    """An Inv node evaluated to a singular matrix."""

    def __init__(self, node_id: int):
        super().__init__(f"Singular inverse at node {node_id}")
        self.node_id = node_id


class DegenerateSample(NcidError):
    """No usable sample point within the retry budget."""

    def __init__(self, retries: int, what: str = "sample"):
        super().__init__(f"No non-degenerate {what} after {retries} retries")
        self.retries = retries


# ---------------------------------------------------------------------------
# DAG
# ---------------------------------------------------------------------------

class ExprGraph:
    """Append-only node table with structural deduplication."""

    def __init__(self):
        self.nodes: List[Tuple] = []
        self.node_to_id: Dict[Tuple, int] = {}

    def add_node(self, node: Tuple) -> int:
        existing = self.node_to_id.get(node)
        if existing is not None:
            return existing
        node_id = len(self.nodes)
        self.nodes.append(node)
        self.node_to_id[node] = node_id
        return node_id

    def __len__(self) -> int:
        return len(self.nodes)

    def var(self, name: str) -> "RatExpr":
        return RatExpr(self, self.add_node(("var", name)))

    def const(self, value) -> "RatExpr":
        return RatExpr(self, self.add_node(("const", to_fraction(value))))

    def add(self, left: "RatExpr", right: "RatExpr") -> "RatExpr":
        return RatExpr(self, self.add_node(("add", left.id, right.id)))

    def mul(self, left: "RatExpr", right: "RatExpr") -> "RatExpr":
        return RatExpr(self, self.add_node(("mul", left.id, right.id)))

    def neg(self, operand: "RatExpr") -> "RatExpr":
        node = self.nodes[operand.id]
        if node[0] == "const":
            return self.const(-node[1])
        return RatExpr(self, self.add_node(("neg", operand.id)))

    def inv(self, operand: "RatExpr") -> "RatExpr":
        return RatExpr(self, self.add_node(("inv", operand.id)))


class RatExpr:
    """Handle on one DAG node; supports +, -, * and inverse()."""

    __slots__ = ("graph", "id")

    def __init__(self, graph: ExprGraph, node_id: int):
        self.graph = graph
        self.id = node_id

    @property
    def node(self) -> Tuple:
        return self.graph.nodes[self.id]

    @property
    def kind(self) -> str:
        return self.node[0]

    def children(self) -> List["RatExpr"]:
        node = self.node
        if node[0] in ("var", "const"):
            return []
        return [RatExpr(self.graph, child) for child in node[1:]]

    def _lift(self, other) -> "RatExpr":
        if isinstance(other, RatExpr):
            if other.graph is not self.graph:
                raise ValueError("Expressions belong to different graphs")
            return other
        return self.graph.const(other)

    def __add__(self, other):
        return self.graph.add(self, self._lift(other))

    def __radd__(self, other):
        return self.graph.add(self._lift(other), self)

    def __sub__(self, other):
        return self.graph.add(self, self.graph.neg(self._lift(other)))

    def __rsub__(self, other):
        return self.graph.add(self._lift(other), self.graph.neg(self))

    def __mul__(self, other):
        return self.graph.mul(self, self._lift(other))

    def __rmul__(self, other):
        return self.graph.mul(self._lift(other), self)

    def __neg__(self):
        return self.graph.neg(self)

    def inverse(self) -> "RatExpr":
        return self.graph.inv(self)

    def __pow__(self, exponent: int) -> "RatExpr":
        if exponent == 0:
            return self.graph.const(1)
        result = self
        for _ in range(abs(exponent) - 1):
            result = result * self
        return result if exponent > 0 else result.inverse()

    def __eq__(self, other) -> bool:
        return isinstance(other, RatExpr) and other.graph is self.graph and other.id == self.id

    def __hash__(self) -> int:
        return hash((id(self.graph), self.id))

    def reachable(self) -> List[int]:
        """Node ids reachable from this node, children before parents."""
        order: List[int] = []
        seen = set()
        stack = [(self.id, False)]
        nodes = self.graph.nodes
        while stack:
            node_id, expanded = stack.pop()
            if expanded:
                order.append(node_id)
                continue
            if node_id in seen:
                continue
            seen.add(node_id)
            stack.append((node_id, True))
            node = nodes[node_id]
            if node[0] not in ("var", "const"):
                for child in reversed(node[1:]):
                    if child not in seen:
                        stack.append((child, False))
        return order

    @property
    def size(self) -> int:
        return len(self.reachable())

    @property
    def variables(self) -> List[str]:
        nodes = self.graph.nodes
        return sorted({nodes[i][1] for i in self.reachable() if nodes[i][0] == "var"})

    def text(self) -> str:
        return print_expr(self)

    def digest(self) -> str:
        """Structural hash, computed bottom-up so shared nodes are hashed once."""
        nodes = self.graph.nodes
        hashes: Dict[int, str] = {}
        for node_id in self.reachable():
            node = nodes[node_id]
            if node[0] in ("var", "const"):
                payload = f"{node[0]}:{node[1]}"
            else:
                payload = node[0] + ":" + ",".join(hashes[child] for child in node[1:])
            hashes[node_id] = hashlib.sha256(payload.encode("utf-8")).hexdigest()
        return hashes[self.id][:16]

    def __repr__(self) -> str:
        return f"RatExpr({self.text()})"


def variables(names: Iterable[str], graph: Optional[ExprGraph] = None) -> List[RatExpr]:
    graph = ExprGraph() if graph is None else graph
    return [graph.var(name) for name in names]


# ---------------------------------------------------------------------------
# Printer
# ---------------------------------------------------------------------------

def print_expr(expr: RatExpr) -> str:
    """Canonical text; parse_expr(print_expr(e)) is structurally e."""
    nodes = expr.graph.nodes
    texts: Dict[int, str] = {}
    for node_id in expr.reachable():
        node = nodes[node_id]
        kind = node[0]
        if kind == "var":
            texts[node_id] = node[1]
        elif kind == "const":
            value = node[1]
            texts[node_id] = format_scalar(value) if value >= 0 else f"({format_scalar(value)})"
        elif kind == "add":
            left, right = node[1], node[2]
            right_node = nodes[right]
            if right_node[0] == "neg":
                inner = right_node[1]
                body = texts[inner]
                if nodes[inner][0] == "add":
                    body = f"({body})"
                texts[node_id] = f"{texts[left]} - {body}"
            else:
                body = texts[right]
                if right_node[0] == "add":
                    body = f"({body})"
                texts[node_id] = f"{texts[left]} + {body}"
        elif kind == "mul":
            left, right = node[1], node[2]
            left_text = texts[left]
            if nodes[left][0] == "add":
                left_text = f"({left_text})"
            right_text = texts[right]
            if nodes[right][0] in ("add", "mul"):
                right_text = f"({right_text})"
            texts[node_id] = f"{left_text}*{right_text}"
        elif kind == "neg":
            operand = node[1]
            body = texts[operand]
            if nodes[operand][0] in ("add", "mul"):
                body = f"({body})"
            texts[node_id] = f"-{body}"
        elif kind == "inv":
            operand = node[1]
            body = texts[operand]
            if nodes[operand][0] not in ("var", "inv", "const"):
                body = f"({body})"
            texts[node_id] = f"{body}^-1"
    return texts[expr.id]


# ---------------------------------------------------------------------------
# Block matrices of expressions
# ---------------------------------------------------------------------------

class BlockExpr:
    """
    Block matrix of expressions. Kinds: grid (entries), add, mul, inv and
    transpose. Transposition moves blocks and never transposes entries.
    """

    def __init__(self, kind: str, entries: Optional[List[List[RatExpr]]] = None,
                 operands: Tuple["BlockExpr", ...] = ()):
        self.kind = kind
        self.entries = entries
        self.operands = operands
        if kind == "grid":
            if not entries or any(len(row) != len(entries[0]) for row in entries):
                raise ValueError("Block grid must be rectangular and non-empty")
            self.shape = (len(entries), len(entries[0]))
        elif kind == "add":
            if operands[0].shape != operands[1].shape:
                raise ValueError("Block shapes differ")
            self.shape = operands[0].shape
        elif kind == "mul":
            if operands[0].shape[1] != operands[1].shape[0]:
                raise ValueError("Block shapes do not compose")
            self.shape = (operands[0].shape[0], operands[1].shape[1])
        elif kind == "inv":
            if operands[0].shape[0] != operands[0].shape[1]:
                raise ValueError("Only square block matrices have inverses")
            self.shape = operands[0].shape
        elif kind == "transpose":
            self.shape = (operands[0].shape[1], operands[0].shape[0])
        else:
            raise ValueError(f"Unknown block kind {kind!r}")

    @classmethod
    def grid(cls, entries: Sequence[Sequence[RatExpr]]) -> "BlockExpr":
        return cls("grid", [list(row) for row in entries])

    def __add__(self, other: "BlockExpr") -> "BlockExpr":
        if self.kind == "grid" and other.kind == "grid" and self.shape == other.shape:
            return BlockExpr.grid([[a + b for a, b in zip(r1, r2)]
                                   for r1, r2 in zip(self.entries, other.entries)])
        return BlockExpr("add", operands=(self, other))

    def __neg__(self) -> "BlockExpr":
        if self.kind != "grid":
            raise ValueError("Negation is defined on grids only")
        return BlockExpr.grid([[-a for a in row] for row in self.entries])

    def __sub__(self, other: "BlockExpr") -> "BlockExpr":
        return self + (-other)

    def __mul__(self, other: "BlockExpr") -> "BlockExpr":
        if self.kind == "grid" and other.kind == "grid":
            rows, inner = self.shape
            if inner != other.shape[0]:
                raise ValueError("Block shapes do not compose")
            out = []
            for i in range(rows):
                row = []
                for j in range(other.shape[1]):
                    total = self.entries[i][0] * other.entries[0][j]
                    for k in range(1, inner):
                        total = total + self.entries[i][k] * other.entries[k][j]
                    row.append(total)
                out.append(row)
            return BlockExpr.grid(out)
        return BlockExpr("mul", operands=(self, other))

    def transpose(self) -> "BlockExpr":
        if self.kind == "grid":
            rows, cols = self.shape
            return BlockExpr.grid([[self.entries[i][j] for i in range(rows)] for j in range(cols)])
        return BlockExpr("transpose", operands=(self,))

    def inverse(self) -> "BlockExpr":
        return BlockExpr("inv", operands=(self,))

    @property
    def variables(self) -> List[str]:
        names = set()
        if self.kind == "grid":
            for row in self.entries:
                for entry in row:
                    names.update(entry.variables)
        for operand in self.operands:
            names.update(operand.variables)
        return sorted(names)

    def text(self) -> str:
        if self.kind == "grid":
            return "[" + ", ".join("[" + ", ".join(e.text() for e in row) + "]"
                                   for row in self.entries) + "]"
        if self.kind == "transpose":
            return f"transpose({self.operands[0].text()})"
        if self.kind == "inv":
            return f"({self.operands[0].text()})^-1"
        symbol = " + " if self.kind == "add" else "*"
        return f"({self.operands[0].text()}){symbol}({self.operands[1].text()})"

    def digest(self) -> str:
        if self.kind == "grid":
            payload = "grid:" + ";".join(",".join(e.digest() for e in row) for row in self.entries)
        else:
            payload = self.kind + ":" + ",".join(op.digest() for op in self.operands)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]

    def __repr__(self) -> str:
        return f"BlockExpr({self.text()})"


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<int>\d+)|(?P<op>[-+*^()\[\],/]))")


def _tokenize(text: str) -> List[Tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        match = _TOKEN.match(text, pos)
        if not match:
            raise ParseError(f"Unexpected character {text[pos]!r}", pos)
        kind = match.lastgroup
        start = match.start(kind)
        tokens.append((kind, match.group(kind), start))
        pos = match.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, graph: ExprGraph):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.graph = graph

    def peek(self) -> Tuple[str, str, int]:
        return self.tokens[self.pos]

    def take(self) -> Tuple[str, str, int]:
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def expect(self, value: str) -> None:
        kind, text, offset = self.take()
        if text != value or kind == "end":
            raise ParseError(f"Expected {value!r}", offset)

    def at_op(self, value: str) -> bool:
        kind, text, _ = self.peek()
        return kind == "op" and text == value

    def parse_top(self) -> Union[RatExpr, BlockExpr]:
        result = self.block() if self.at_op("[") else self.expr()
        kind, text, offset = self.peek()
        if kind != "end":
            raise ParseError(f"Unexpected token {text!r}", offset)
        return result

    def block(self) -> BlockExpr:
        self.expect("[")
        rows = [self.row()]
        while self.at_op(","):
            self.take()
            rows.append(self.row())
        self.expect("]")
        if any(len(row) != len(rows[0]) for row in rows):
            raise ParseError("Block rows differ in length", self.peek()[2])
        return BlockExpr.grid(rows)

    def row(self) -> List[RatExpr]:
        self.expect("[")
        entries = [self.expr()]
        while self.at_op(","):
            self.take()
            entries.append(self.expr())
        self.expect("]")
        return entries

    def expr(self) -> RatExpr:
        result = self.term()
        while self.at_op("+") or self.at_op("-"):
            _, op, _ = self.take()
            right = self.term()
            result = result + right if op == "+" else self.graph.add(result, self.graph.neg(right))
        return result

    def term(self) -> RatExpr:
        result = self.unary()
        while self.at_op("*"):
            self.take()
            result = self.graph.mul(result, self.unary())
        return result

    def unary(self) -> RatExpr:
        if self.at_op("-"):
            self.take()
            return self.graph.neg(self.unary())
        return self.postfix()

    def postfix(self) -> RatExpr:
        result = self.atom()
        while self.at_op("^"):
            self.take()
            negative = False
            if self.at_op("-"):
                self.take()
                negative = True
            kind, text, offset = self.take()
            if kind != "int":
                raise ParseError("Expected integer exponent", offset)
            power = int(text)
            if power == 0:
                raise ParseError("Zero exponent", offset)
            base = result
            for _ in range(power - 1):
                result = self.graph.mul(result, base)
            if negative:
                result = self.graph.inv(result)
        return result

    def atom(self) -> RatExpr:
        kind, text, offset = self.take()
        if kind == "ident":
            return self.graph.var(text)
        if kind == "int":
            value = Fraction(int(text))
            if self.at_op("/"):
                self.take()
                kind2, text2, offset2 = self.take()
                if kind2 != "int" or int(text2) == 0:
                    raise ParseError("Expected nonzero denominator", offset2)
                value = Fraction(int(text), int(text2))
            return self.graph.const(value)
        if kind == "op" and text == "(":
            inner = self.expr()
            self.expect(")")
            return inner
        if kind == "end":
            raise ParseError("Unexpected end of input", offset)
        raise ParseError(f"Unexpected token {text!r}", offset)


def parse_expr(text: str, graph: Optional[ExprGraph] = None) -> Union[RatExpr, BlockExpr]:
    """
    Parse expression text into the DAG.

    Raises:
        ParseError: with the offset of the offending token
    """
    graph = ExprGraph() if graph is None else graph
    return _Parser(text, graph).parse_top()


# ---------------------------------------------------------------------------
# Conversions
# ---------------------------------------------------------------------------

def substitute(expr: RatExpr, mapping: Mapping[str, RatExpr]) -> RatExpr:
    """Replace variables by expressions, rebuilding each reachable node once."""
    graph = expr.graph
    nodes = graph.nodes
    built: Dict[int, RatExpr] = {}
    for node_id in expr.reachable():
        node = nodes[node_id]
        kind = node[0]
        if kind == "var":
            built[node_id] = mapping.get(node[1], RatExpr(graph, node_id))
        elif kind == "const":
            built[node_id] = RatExpr(graph, node_id)
        elif kind == "add":
            built[node_id] = graph.add(built[node[1]], built[node[2]])
        elif kind == "mul":
            built[node_id] = graph.mul(built[node[1]], built[node[2]])
        elif kind == "neg":
            built[node_id] = graph.neg(built[node[1]])
        else:
            built[node_id] = graph.inv(built[node[1]])
    return built[expr.id]


def to_ncpoly(expr: RatExpr, names: Sequence[str]) -> NCPoly:
    """
    Expand into the group ring when every inverse is of a monomial.

    Raises:
        ValueError: an inverse of a non-monomial, or an unknown variable
    """
    index = {name: i + 1 for i, name in enumerate(names)}
    nodes = expr.graph.nodes
    values: Dict[int, NCPoly] = {}
    for node_id in expr.reachable():
        node = nodes[node_id]
        kind = node[0]
        if kind == "var":
            if node[1] not in index:
                raise ValueError(f"Variable {node[1]} is not in the alphabet")
            values[node_id] = NCPoly.generator(index[node[1]])
        elif kind == "const":
            values[node_id] = NCPoly.constant(node[1])
        elif kind == "add":
            values[node_id] = values[node[1]] + values[node[2]]
        elif kind == "mul":
            values[node_id] = values[node[1]] * values[node[2]]
        elif kind == "neg":
            values[node_id] = -values[node[1]]
        else:
            operand = values[node[1]]
            if not operand.is_monomial:
                raise ValueError(f"Inverse of a non-monomial at node {node_id}")
            values[node_id] = operand ** -1
    return values[expr.id]


def from_ncpoly(poly: NCPoly, names: Sequence[str], graph: Optional[ExprGraph] = None) -> RatExpr:
    """Group ring element -> expression (sum of coefficient * letter products)."""
    graph = ExprGraph() if graph is None else graph
    atoms = {}
    total: Optional[RatExpr] = None
    for word, coef in poly.items():
        term: Optional[RatExpr] = None
        for letter in word:
            if letter not in atoms:
                base = graph.var(names[abs(letter) - 1])
                atoms[letter] = base if letter > 0 else base.inverse()
            term = atoms[letter] if term is None else term * atoms[letter]
        if term is None:
            term = graph.const(coef)
        elif coef != 1:
            term = graph.const(coef) * term
        total = term if total is None else total + term
    return total if total is not None else graph.const(0)


# ---------------------------------------------------------------------------
# Matrix points and evaluation
# ---------------------------------------------------------------------------

@dataclass
class MatrixPoint:
    """One d x d matrix per variable over a fixed field."""

    field: Field
    d: int
    matrices: Dict[str, DomainMatrix]
    seed: int
    group_vars: Tuple[str, ...] = ()

    def describe(self) -> Dict:
        return {"field": self.field.label, "d": self.d, "seed": self.seed}


def sample_point(names: Sequence[str], d: int, field, seed: int,
                 group_vars: Optional[Iterable[str]] = None,
                 max_retries: int = MAX_RESAMPLES) -> MatrixPoint:
    """
    Seeded random point: QQ entries in [-9, 9], GF(p) entries uniform.
    Group variables (all of them by default) are resampled until invertible.

    Raises:
        DegenerateSample: a group variable stayed singular for max_retries draws
    """
    if d < 1:
        raise ValueError("Dimension must be at least 1")
    field = Field.parse(field)
    group = set(names if group_vars is None else group_vars)
    rng = random.Random(seed)
    matrices = {}
    for name in names:
        for _ in range(max_retries):
            candidate = random_matrix(d, field, rng)
            if name not in group or is_invertible(candidate):
                matrices[name] = candidate
                break
        else:
            raise DegenerateSample(max_retries, f"value for {name}")
    return MatrixPoint(field, d, matrices, seed, tuple(sorted(group)))


def _evaluate_nodes(expr: RatExpr, point: MatrixPoint, memo: Dict[int, DomainMatrix]) -> DomainMatrix:
    nodes = expr.graph.nodes
    field, d = point.field, point.d
    for node_id in expr.reachable():
        if node_id in memo:
            continue
        node = nodes[node_id]
        kind = node[0]
        if kind == "var":
            if node[1] not in point.matrices:
                raise ValueError(f"Variable {node[1]} has no value at this point")
            value = point.matrices[node[1]]
        elif kind == "const":
            value = scalar(node[1], d, field)
        elif kind == "add":
            value = memo[node[1]] + memo[node[2]]
        elif kind == "mul":
            value = memo[node[1]] * memo[node[2]]
        elif kind == "neg":
            value = -memo[node[1]]
        else:
            try:
                value = memo[node[1]].inv()
            except (DMNonInvertibleMatrixError, ZeroDivisionError) as e:
                raise SingularInverse(node_id) from e
        memo[node_id] = value
    return memo[expr.id]


def eval_blocks(block: BlockExpr, point: MatrixPoint,
                memo: Optional[Dict[int, DomainMatrix]] = None) -> List[List[DomainMatrix]]:
    """Evaluate a block expression to a grid of d x d matrices."""
    memo = {} if memo is None else memo
    if block.kind == "grid":
        return [[_evaluate_nodes(entry, point, memo) for entry in row] for row in block.entries]
    if block.kind == "transpose":
        inner = eval_blocks(block.operands[0], point, memo)
        return [list(col) for col in zip(*inner)]
    if block.kind == "add":
        left = eval_blocks(block.operands[0], point, memo)
        right = eval_blocks(block.operands[1], point, memo)
        return [[a + b for a, b in zip(r1, r2)] for r1, r2 in zip(left, right)]
    if block.kind == "mul":
        full = join_blocks(eval_blocks(block.operands[0], point, memo)) * \
            join_blocks(eval_blocks(block.operands[1], point, memo))
        return split_blocks(full, block.shape[0], block.shape[1], point.d)
    full = join_blocks(eval_blocks(block.operands[0], point, memo))
    try:
        inverse = full.inv()
    except (DMNonInvertibleMatrixError, ZeroDivisionError) as e:
        raise SingularInverse(-1) from e
    return split_blocks(inverse, block.shape[0], block.shape[1], point.d)


def eval_expr(expr: Union[RatExpr, BlockExpr], point: MatrixPoint) -> DomainMatrix:
    """
    Homomorphic evaluation, memoized per call. Block expressions evaluate to
    the assembled (r*d) x (c*d) matrix.

    Raises:
        SingularInverse: an inverse node met a singular matrix
    """
    if isinstance(expr, BlockExpr):
        return join_blocks(eval_blocks(expr, point))
    return _evaluate_nodes(expr, point, {})


# ---------------------------------------------------------------------------
# Randomized identity testing
# ---------------------------------------------------------------------------

def derive_seed(base: int, *parts) -> int:
    """Deterministic sub-seed for one (dimension, field, trial, attempt) slot."""
    text = ":".join(str(p) for p in (base,) + parts)
    return int(hashlib.sha256(text.encode("utf-8")).hexdigest()[:12], 16)


@dataclass
class Verdict:
    """Outcome of prove_zero."""

    expr_hash: str
    verdict: str
    schedule: List[Dict] = field(default_factory=list)
    witness: Optional[Dict] = None
    singular_rate: float = 0.0
    rationale: str = ""

    @property
    def is_zero_evidence(self) -> bool:
        return self.verdict == "zero-evidence"

    def to_dict(self) -> Dict:
        data = {
            "expr_hash": self.expr_hash,
            "verdict": self.verdict,
            "schedule": self.schedule,
            "singular_rate": f"{self.singular_rate:.4f}",
        }
        if self.witness is not None:
            data["witness"] = self.witness
        if self.rationale:
            data["rationale"] = self.rationale
        return data


def evaluate_with_resampling(expr: Union[RatExpr, BlockExpr], names: Sequence[str], d: int,
                             field: Field, base_seed: int, slot: Tuple,
                             group_vars: Optional[Iterable[str]] = None,
                             max_resamples: int = MAX_RESAMPLES) -> Tuple[Optional[DomainMatrix], int, int]:
    """
    Evaluate at the first non-singular point for this slot.

    Returns:
        (value or None, seed used, number of singular draws)
    """
    singular = 0
    for attempt in range(max_resamples):
        seed = derive_seed(base_seed, *slot, attempt)
        try:
            point = sample_point(names, d, field, seed, group_vars)
            return eval_expr(expr, point), seed, singular
        except (SingularInverse, DegenerateSample) as e:
            singular += 1
            logger.debug(f"Resampling slot {slot}: {e}")
    return None, -1, singular


def prove_zero(expr: Union[RatExpr, BlockExpr], dims: Sequence[int] = (1, 2, 3), trials: int = 5,
               fields: Sequence = ("QQ",), seed: int = 0,
               group_vars: Optional[Iterable[str]] = None) -> Verdict:
    """
    Randomized identity test. Any nonzero exact value is a witness (seed
    recorded, re-checkable); all zero values give zero-evidence for the
    recorded schedule. Slots that stay singular are counted, never passed.
    """
    names = expr.variables
    digest = expr.digest()
    schedule = []
    draws = singular_total = evaluated = 0
    for d in dims:
        for tag in fields:
            field = Field.parse(tag)
            entry = {"d": d, "field": field.label, "trials": trials, "singular": 0}
            schedule.append(entry)
            for trial in range(trials):
                value, used_seed, singular = evaluate_with_resampling(
                    expr, names, d, field, seed, (d, field.label, trial), group_vars)
                entry["singular"] += singular
                singular_total += singular
                draws += singular + (1 if value is not None else 0)
                if value is None:
                    continue
                evaluated += 1
                if not value.is_zero_matrix:
                    logger.info(f"Nonzero witness for {digest} at d={d}, {field.label}, seed={used_seed}")
                    return Verdict(digest, "nonzero", schedule,
                                   {"d": d, "field": field.label, "seed": used_seed},
                                   singular_total / max(draws, 1))
    rate = singular_total / max(draws, 1)
    if not evaluated:
        logger.warning(f"Every sample of {digest} was singular")
        return Verdict(digest, "all-singular", schedule, singular_rate=rate)
    top = max(dims)
    return Verdict(digest, "zero-evidence", schedule, singular_rate=rate,
                   rationale=f"no polynomial identity of degree < {2 * top} holds for {top}x{top} matrices")


def recheck_witness(expr: Union[RatExpr, BlockExpr], witness: Mapping,
                    group_vars: Optional[Iterable[str]] = None) -> bool:
    """True if the recorded witness still evaluates to a nonzero matrix."""
    point = sample_point(expr.variables, witness["d"], witness["field"], witness["seed"], group_vars)
    return not eval_expr(expr, point).is_zero_matrix
