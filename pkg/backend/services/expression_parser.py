"""
Scalar expression language for warping functions, Clairaut functions and
factor maps.

Grammar (whitespace insignificant, no implicit multiplication):

    expr  := term (('+' | '-') term)*
    term  := unary (('*' | '/') unary)*
    unary := '-' unary | power
    power := atom ('^' unary)?
    atom  := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'

'^' is right-associative and binds tighter than a leading minus, so
"-x1^2" is -(x1^2) and "2^-1" is 0.5.
"""

import math
import re
import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ArityError, DomainError, ParseError, UnknownSymbol
from . import settings

logger = logging.getLogger(__name__)

TOKEN_PATTERN = re.compile(
    r"(?P<number>(?:[0-9]+\.[0-9]*|\.[0-9]+|[0-9]+)(?:[eE][+-]?[0-9]+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),])"
)
COORDINATE_PATTERN = re.compile(r"^x([1-9][0-9]*)$")

CONSTANTS: Dict[str, float] = {"pi": math.pi, "e": math.e}


def _ln(x: float) -> float:
    if x <= 0.0:
        raise ValueError("ln of non-positive value")
    return math.log(x)


def _sqrt(x: float) -> float:
    if x < 0.0:
        raise ValueError("sqrt of negative value")
    return math.sqrt(x)


FUNCTIONS: Dict[str, Tuple[int, Callable[..., float]]] = {
    "exp": (1, math.exp),
    "ln": (1, _ln),
    "sin": (1, math.sin),
    "cos": (1, math.cos),
    "tan": (1, math.tan),
    "sqrt": (1, _sqrt),
    "sinh": (1, math.sinh),
    "cosh": (1, math.cosh),
    "tanh": (1, math.tanh),
    "pow": (2, math.pow),
}


# ---------------------------------------------------------------------------
# AST nodes
# ---------------------------------------------------------------------------

class Node:
    """Base class of expression tree nodes"""

    def evaluate(self, point: Sequence[float]) -> float:
        raise NotImplementedError

    def pretty(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class Number(Node):
    value: float

    def evaluate(self, point: Sequence[float]) -> float:
        return self.value

    def pretty(self) -> str:
        return repr(self.value)


@dataclass(frozen=True)
class Constant(Node):
    name: str

    def evaluate(self, point: Sequence[float]) -> float:
        return CONSTANTS[self.name]

    def pretty(self) -> str:
        return self.name


@dataclass(frozen=True)
class Coordinate(Node):
    index: int
    name: str

    def evaluate(self, point: Sequence[float]) -> float:
        return float(point[self.index])

    def pretty(self) -> str:
        return self.name


@dataclass(frozen=True)
class Negate(Node):
    operand: Node

    def evaluate(self, point: Sequence[float]) -> float:
        return -self.operand.evaluate(point)

    def pretty(self) -> str:
        return f"(-{self.operand.pretty()})"


@dataclass(frozen=True)
class BinaryOp(Node):
    op: str
    left: Node
    right: Node

    def evaluate(self, point: Sequence[float]) -> float:
        a = self.left.evaluate(point)
        b = self.right.evaluate(point)
        try:
            if self.op == "+":
                return a + b
            if self.op == "-":
                return a - b
            if self.op == "*":
                return a * b
            if self.op == "/":
                if b == 0.0:
                    raise DomainError("Division by zero", self.pretty())
                return a / b
            return math.pow(a, b)
        except (ValueError, OverflowError, ZeroDivisionError) as e:
            if isinstance(e, DomainError):
                raise
            raise DomainError(f"Invalid '{self.op}' ({e})", self.pretty()) from e

    def pretty(self) -> str:
        return f"({self.left.pretty()} {self.op} {self.right.pretty()})"


@dataclass(frozen=True)
class Call(Node):
    function: str
    args: Tuple[Node, ...]

    def evaluate(self, point: Sequence[float]) -> float:
        _, fn = FUNCTIONS[self.function]
        values = [arg.evaluate(point) for arg in self.args]
        try:
            return fn(*values)
        except (ValueError, OverflowError) as e:
            raise DomainError(f"Invalid argument for {self.function} ({e})", self.pretty()) from e

    def pretty(self) -> str:
        return f"{self.function}({', '.join(arg.pretty() for arg in self.args)})"


# ---------------------------------------------------------------------------
# Parsed expression
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Expr:
    """A parsed expression bound to an ordered list of coordinate names"""

    root: Node
    coordinates: Tuple[str, ...]
    source: str = ""
    fd_step: float = settings.FD_STEP

    @property
    def arity(self) -> int:
        return len(self.coordinates)

    def _check_point(self, point) -> np.ndarray:
        p = np.atleast_1d(np.asarray(point, dtype=float))
        if p.shape != (self.arity,):
            raise ArityError(
                f"Expression '{self.source or self.pretty()}' expects {self.arity} coordinates, got {p.size}"
            )
        return p

    def evaluate(self, point) -> float:
        p = self._check_point(point)
        return float(self.root.evaluate(p))

    __call__ = evaluate

    def deriv(self, index: int, point) -> float:
        """
        Central-difference partial derivative

        Args:
            index: 1-based coordinate index (x1 is 1)
            point: evaluation point
        """
        p = self._check_point(point)
        if not 1 <= index <= self.arity:
            raise ArityError(f"Coordinate index {index} out of range 1..{self.arity}")
        i = index - 1
        h = self.fd_step * max(1.0, abs(p[i]))
        forward = p.copy()
        backward = p.copy()
        forward[i] += h
        backward[i] -= h
        return (self.root.evaluate(forward) - self.root.evaluate(backward)) / (2.0 * h)

    def pretty(self) -> str:
        return self.root.pretty()

    def __str__(self) -> str:
        return self.source or self.pretty()


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _byte_offset(src: str, char_index: int) -> int:
    return len(src[:char_index].encode("utf-8"))


class ExpressionParser:
    """Recursive-descent parser for the scalar expression language"""

    def __init__(self, fd_step: float = settings.FD_STEP):
        self.logger = logger
        self.fd_step = fd_step

    def tokenize(self, src: str) -> List[Tuple[str, str, int]]:
        tokens = []
        pos = 0
        while pos < len(src):
            if src[pos].isspace():
                pos += 1
                continue
            match = TOKEN_PATTERN.match(src, pos)
            if not match:
                raise ParseError(f"Unexpected character '{src[pos]}'", _byte_offset(src, pos))
            kind = match.lastgroup
            tokens.append((kind, match.group(kind), _byte_offset(src, pos)))
            pos = match.end()
        tokens.append(("end", "", _byte_offset(src, len(src))))
        return tokens

    def parse(self, src: str, coordinates: Optional[Sequence[str]] = None) -> Expr:
        """
        Parse source text into an Expr

        Args:
            src: expression text
            coordinates: declared coordinate names in evaluation order; when
                omitted, x1..xN are declared with N the largest index used

        Returns:
            Parsed expression
        """
        if not src or not src.strip():
            raise ParseError("Empty expression", 0)

        tokens = self.tokenize(src)
        inferred = coordinates is None
        declared = list(coordinates) if coordinates is not None else []
        state = _ParseState(tokens, declared, inferred)
        root = state.parse_expr()
        kind, text, offset = state.peek()
        if kind != "end":
            raise ParseError(f"Unexpected token '{text}'", offset)

        if inferred:
            count = max(state.used_indices, default=0)
            declared = [f"x{k}" for k in range(1, count + 1)]
            root = _reindex(root, declared)

        self.logger.debug(f"Parsed '{src}' over {declared}")
        return Expr(root=root, coordinates=tuple(declared), source=src, fd_step=self.fd_step)


class _ParseState:
    def __init__(self, tokens, declared: List[str], inferred: bool):
        self.tokens = tokens
        self.index = 0
        self.declared = declared
        self.inferred = inferred
        self.used_indices: List[int] = []

    def peek(self):
        return self.tokens[self.index]

    def advance(self):
        token = self.tokens[self.index]
        self.index += 1
        return token

    def expect(self, text: str):
        kind, value, offset = self.advance()
        if value != text or kind == "end":
            shown = value if kind != "end" else "end of input"
            raise ParseError(f"Expected '{text}' but found '{shown}'", offset)

    def parse_expr(self) -> Node:
        node = self.parse_term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = BinaryOp(op, node, self.parse_term())
        return node

    def parse_term(self) -> Node:
        node = self.parse_unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = BinaryOp(op, node, self.parse_unary())
        return node

    def parse_unary(self) -> Node:
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.advance()
            return Negate(self.parse_unary())
        return self.parse_power()

    def parse_power(self) -> Node:
        base = self.parse_atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.advance()
            return BinaryOp("^", base, self.parse_unary())
        return base

    def parse_atom(self) -> Node:
        kind, text, offset = self.advance()
        if kind == "number":
            value = float(text)
            if not math.isfinite(value):
                raise ParseError(f"Number '{text}' is out of range", offset)
            return Number(value)
        if kind == "ident":
            if self.peek()[0] == "op" and self.peek()[1] == "(":
                return self.parse_call(text, offset)
            return self.resolve_identifier(text, offset)
        if kind == "op" and text == "(":
            node = self.parse_expr()
            self.expect(")")
            return node
        shown = text if kind != "end" else "end of input"
        raise ParseError(f"Unexpected token '{shown}'", offset)

    def parse_call(self, name: str, offset: int) -> Node:
        if name not in FUNCTIONS:
            raise UnknownSymbol(name, offset)
        self.expect("(")
        args = [self.parse_expr()]
        while self.peek()[0] == "op" and self.peek()[1] == ",":
            self.advance()
            args.append(self.parse_expr())
        self.expect(")")
        arity, _ = FUNCTIONS[name]
        if len(args) != arity:
            raise ArityError(f"Function '{name}' takes {arity} argument(s), got {len(args)} at byte offset {offset}")
        return Call(name, tuple(args))

    def resolve_identifier(self, name: str, offset: int) -> Node:
        if name in self.declared:
            return Coordinate(self.declared.index(name), name)
        if self.inferred:
            match = COORDINATE_PATTERN.match(name)
            if match:
                k = int(match.group(1))
                self.used_indices.append(k)
                return Coordinate(k - 1, name)
        if name in CONSTANTS:
            return Constant(name)
        raise UnknownSymbol(name, offset)


def _reindex(node: Node, declared: List[str]) -> Node:
    if isinstance(node, Coordinate):
        return Coordinate(declared.index(node.name), node.name)
    if isinstance(node, Negate):
        return Negate(_reindex(node.operand, declared))
    if isinstance(node, BinaryOp):
        return BinaryOp(node.op, _reindex(node.left, declared), _reindex(node.right, declared))
    if isinstance(node, Call):
        return Call(node.function, tuple(_reindex(a, declared) for a in node.args))
    return node


_default_parser = ExpressionParser()


def parse(src: str, coordinates: Optional[Sequence[str]] = None) -> Expr:
    return _default_parser.parse(src, coordinates)


def coordinate_names(start: int, count: int) -> List[str]:
    """Names x<start>..x<start+count-1> used for factor coordinates inside a product chart"""
    return [f"x{k}" for k in range(start, start + count)]


ExprLike = Union[str, Expr]
