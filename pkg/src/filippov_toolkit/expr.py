# Copyright 2025 Canonical Ltd.
# See LICENSE file for licensing details.

"""Module for parsing, printing, evaluating and differentiating scalar expressions.

Grammar (no implicit multiplication, functions bind tighter than operators):

    sum     := product (("+" | "-") product)*
    product := unary (("*" | "/") unary)*
    unary   := "-" unary | power
    power   := primary ("^" ["-"] INTEGER)*
    primary := NUMBER | "t" | "x<k>" | FUNCTION "(" sum ("," sum)* ")" | "(" sum ")"
"""

import dataclasses
import logging
import math
import re
from typing import Iterator, Sequence, Union

import numpy as np
import numpy.typing as npt

from filippov_toolkit.errors import (
    DimensionMismatchError,
    ExpressionDomainError,
    ExpressionSyntaxError,
    NonDifferentiablePointError,
    UnknownIdentifierError,
    VariableOutOfRangeError,
)

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]
BoolArray = npt.NDArray[np.bool_]

FUNCTION_ARITY = {
    "sin": 1,
    "cos": 1,
    "exp": 1,
    "log": 1,
    "abs": 1,
    "sqrt": 1,
    "tanh": 1,
    "min": 2,
    "max": 2,
}
KINK_FUNCTIONS = frozenset({"abs", "min", "max"})
KINK_TOLERANCE = 1e-12

_TOKEN_PATTERN = re.compile(
    r"\s*(?:(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)
_VARIABLE_PATTERN = re.compile(r"x(\d+)")
_INTEGER_PATTERN = re.compile(r"\d+")


@dataclasses.dataclass(frozen=True)
class Const:
    """Real literal.

    Attributes:
        value: The literal value.
    """

    value: float


@dataclasses.dataclass(frozen=True)
class Var:
    """State variable x<index + 1>.

    Attributes:
        index: The zero based coordinate index.
    """

    index: int


@dataclasses.dataclass(frozen=True)
class Time:
    """The time variable t."""


@dataclasses.dataclass(frozen=True)
class Neg:
    """Unary minus.

    Attributes:
        operand: The negated subexpression.
    """

    operand: "Node"


@dataclasses.dataclass(frozen=True)
class BinOp:
    """Binary arithmetic operation.

    Attributes:
        op: One of "+", "-", "*", "/".
        left: The left operand.
        right: The right operand.
    """

    op: str
    left: "Node"
    right: "Node"


@dataclasses.dataclass(frozen=True)
class Pow:
    """Integer power.

    Attributes:
        base: The base subexpression.
        exponent: The integer exponent.
    """

    base: "Node"
    exponent: int


@dataclasses.dataclass(frozen=True)
class Call:
    """Function application.

    Attributes:
        name: The function name, a key of FUNCTION_ARITY.
        args: The argument subexpressions.
    """

    name: str
    args: tuple["Node", ...]


Node = Union[Const, Var, Time, Neg, BinOp, Pow, Call]


@dataclasses.dataclass(frozen=True)
class EvalPoint:
    """Argument (t, x) of an expression.

    Attributes:
        x: The state vector.
        t: The time.
    """

    x: tuple[float, ...]
    t: float = 0.0

    def __post_init__(self) -> None:
        """Validate the point entries.

        Raises:
            ExpressionDomainError: If an entry is not finite.
        """
        if not all(math.isfinite(value) for value in (*self.x, self.t)):
            raise ExpressionDomainError(f"Evaluation point has non finite entries: {self}")

    @classmethod
    def of(cls, x: Sequence[float] | FloatArray, t: float = 0.0) -> "EvalPoint":
        """Build a point from any float sequence.

        Args:
            x: The state vector.
            t: The time.

        Returns:
            The evaluation point.
        """
        return cls(x=tuple(float(value) for value in x), t=float(t))


@dataclasses.dataclass(frozen=True)
class _Token:
    """Lexical token.

    Attributes:
        kind: One of "number", "ident", "op", "end".
        text: The token text.
        position: The zero based offset in the source text.
    """

    kind: str
    text: str
    position: int


def _tokenize(text: str) -> list[_Token]:
    """Split expression text into tokens.

    Args:
        text: The expression source.

    Raises:
        ExpressionSyntaxError: If an unexpected character is found.

    Returns:
        The tokens, terminated by an end token.
    """
    tokens = []
    position = 0
    while position < len(text):
        if text[position:].strip() == "":
            break
        match = _TOKEN_PATTERN.match(text, position)
        if not match or match.lastgroup is None:
            offset = position + len(text[position:]) - len(text[position:].lstrip())
            raise ExpressionSyntaxError(
                f"Unexpected character {text[offset]!r}",
                position=offset,
                expected=("number", "identifier", "operator"),
            )
        kind = match.lastgroup
        tokens.append(_Token(kind=kind, text=match.group(kind), position=match.start(kind)))
        position = match.end()
    tokens.append(_Token(kind="end", text="", position=len(text)))
    return tokens


class _Parser:
    """Recursive descent parser over a token list."""

    def __init__(self, text: str, dim: int):
        """Initialize the parser.

        Args:
            text: The expression source.
            dim: The declared state dimension.
        """
        self.tokens = _tokenize(text)
        self.index = 0
        self.dim = dim

    @property
    def current(self) -> _Token:
        """The token under the cursor."""
        return self.tokens[self.index]

    def _advance(self) -> _Token:
        """Consume the current token.

        Returns:
            The consumed token.
        """
        token = self.current
        self.index += 1
        return token

    def _expect(self, text: str) -> None:
        """Consume an operator token with the given text.

        Args:
            text: The expected operator.

        Raises:
            ExpressionSyntaxError: If the current token differs.
        """
        if self.current.text != text or self.current.kind != "op":
            raise ExpressionSyntaxError(
                f"Expected {text!r}", position=self.current.position, expected=(text,)
            )
        self._advance()

    def parse(self) -> Node:
        """Parse a complete expression.

        Raises:
            ExpressionSyntaxError: If tokens remain after the expression.

        Returns:
            The root node.
        """
        node = self._sum()
        if self.current.kind != "end":
            raise ExpressionSyntaxError(
                f"Unexpected token {self.current.text!r}",
                position=self.current.position,
                expected=("+", "-", "*", "/", "^", "end of input"),
            )
        return node

    def _sum(self) -> Node:
        """Parse additive terms.

        Returns:
            The parsed node.
        """
        node = self._product()
        while self.current.kind == "op" and self.current.text in "+-":
            op = self._advance().text
            node = BinOp(op=op, left=node, right=self._product())
        return node

    def _product(self) -> Node:
        """Parse multiplicative terms.

        Returns:
            The parsed node.
        """
        node = self._unary()
        while self.current.kind == "op" and self.current.text in "*/":
            op = self._advance().text
            node = BinOp(op=op, left=node, right=self._unary())
        return node

    def _unary(self) -> Node:
        """Parse unary minus.

        Returns:
            The parsed node.
        """
        if self.current.kind == "op" and self.current.text == "-":
            self._advance()
            return Neg(operand=self._unary())
        return self._power()

    def _power(self) -> Node:
        """Parse integer powers.

        Raises:
            ExpressionSyntaxError: If the exponent is not an integer literal.

        Returns:
            The parsed node.
        """
        node = self._primary()
        while self.current.kind == "op" and self.current.text == "^":
            self._advance()
            sign = 1
            if self.current.kind == "op" and self.current.text == "-":
                self._advance()
                sign = -1
            token = self.current
            if token.kind != "number" or not _INTEGER_PATTERN.fullmatch(token.text):
                raise ExpressionSyntaxError(
                    "Integer exponent expected", position=token.position, expected=("integer",)
                )
            self._advance()
            node = Pow(base=node, exponent=sign * int(token.text))
        return node

    def _primary(self) -> Node:
        """Parse literals, variables, calls and parenthesized expressions.

        Raises:
            ExpressionSyntaxError: If no operand starts at the cursor.

        Returns:
            The parsed node.
        """
        token = self.current
        if token.kind == "number":
            self._advance()
            return Const(value=float(token.text))
        if token.kind == "ident":
            return self._identifier()
        if token.kind == "op" and token.text == "(":
            self._advance()
            node = self._sum()
            self._expect(")")
            return node
        raise ExpressionSyntaxError(
            "Operand expected" if token.kind != "end" else "Unexpected end of input",
            position=token.position,
            expected=("number", "identifier", "(", "-"),
        )

    def _identifier(self) -> Node:
        """Parse a variable or a function call.

        Raises:
            UnknownIdentifierError: If the identifier is not known.
            VariableOutOfRangeError: If the variable index exceeds the dimension.
            ExpressionSyntaxError: If a call has the wrong number of arguments.

        Returns:
            The parsed node.
        """
        token = self._advance()
        name = token.text
        if name == "t":
            return Time()
        if match := _VARIABLE_PATTERN.fullmatch(name):
            index = int(match.group(1))
            if not 1 <= index <= self.dim:
                raise VariableOutOfRangeError(
                    f"Variable {name} at position {token.position} is out of range 1..{self.dim}"
                )
            return Var(index=index - 1)
        if name not in FUNCTION_ARITY:
            raise UnknownIdentifierError(
                f"Unknown identifier {name!r} at position {token.position}"
            )
        self._expect("(")
        args = [self._sum()]
        while self.current.kind == "op" and self.current.text == ",":
            self._advance()
            args.append(self._sum())
        if len(args) != FUNCTION_ARITY[name]:
            raise ExpressionSyntaxError(
                f"Function {name} takes {FUNCTION_ARITY[name]} argument(s), got {len(args)}",
                position=token.position,
            )
        self._expect(")")
        return Call(name=name, args=tuple(args))


def iter_nodes(node: Node) -> Iterator[Node]:
    """Walk a tree in depth first pre-order.

    Args:
        node: The root node.

    Yields:
        Every node of the tree.
    """
    yield node
    match node:
        case Neg(operand=operand):
            yield from iter_nodes(operand)
        case BinOp(left=left, right=right):
            yield from iter_nodes(left)
            yield from iter_nodes(right)
        case Pow(base=base):
            yield from iter_nodes(base)
        case Call(args=args):
            for arg in args:
                yield from iter_nodes(arg)


def to_text(node: Node) -> str:
    """Pretty-print a tree in the parser grammar.

    Args:
        node: The root node.

    Returns:
        Source text that parses back to a structurally identical tree.
    """
    match node:
        case Const(value=value):
            return repr(float(value))
        case Var(index=index):
            return f"x{index + 1}"
        case Time():
            return "t"
        case Neg(operand=operand):
            inner = to_text(operand)
            return f"-({inner})" if isinstance(operand, BinOp) else f"-{inner}"
        case BinOp(op=op, left=left, right=right):
            return f"({to_text(left)} {op} {to_text(right)})"
        case Pow(base=base, exponent=exponent):
            inner = to_text(base)
            if not isinstance(base, (Const, Var, Time, Call)):
                inner = f"({inner})"
            return f"{inner}^{exponent}"
        case Call(name=name, args=args):
            return f"{name}({', '.join(to_text(arg) for arg in args)})"
    raise TypeError(f"Unknown node {node!r}")  # pragma: nocover


def _values(node: Node, x: FloatArray, t: FloatArray) -> FloatArray:
    """Evaluate a tree at many points.

    Args:
        node: The root node.
        x: The states, shape (N, m).
        t: The times, shape (N,).

    Returns:
        The values, shape (N,), with NaN or Inf where undefined.
    """
    match node:
        case Const(value=value):
            return np.full(x.shape[0], value, dtype=np.float64)
        case Var(index=index):
            return x[:, index].astype(np.float64, copy=True)
        case Time():
            return t.astype(np.float64, copy=True)
        case Neg(operand=operand):
            return -_values(operand, x, t)
        case BinOp(op=op, left=left, right=right):
            lhs, rhs = _values(left, x, t), _values(right, x, t)
            match op:
                case "+":
                    return lhs + rhs
                case "-":
                    return lhs - rhs
                case "*":
                    return lhs * rhs
            return lhs / rhs
        case Pow(base=base, exponent=exponent):
            return np.power(_values(base, x, t), float(exponent))
        case Call(name=name, args=args):
            values = [_values(arg, x, t) for arg in args]
            return _CALLS[name](*values)
    raise TypeError(f"Unknown node {node!r}")  # pragma: nocover


_CALLS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "log": np.log,
    "abs": np.abs,
    "sqrt": np.sqrt,
    "tanh": np.tanh,
    "min": np.minimum,
    "max": np.maximum,
}


def _forward(
    node: Node, x: FloatArray, t: FloatArray
) -> tuple[FloatArray, FloatArray, BoolArray]:
    """Evaluate values and gradients in forward mode.

    Args:
        node: The root node.
        x: The states, shape (N, m).
        t: The times, shape (N,).

    Returns:
        Values (N,), gradients with respect to x (N, m) and a kink mask (N,).
    """
    count, dim = x.shape
    match node:
        case Const() | Time():
            return _values(node, x, t), np.zeros((count, dim)), np.zeros(count, dtype=bool)
        case Var(index=index):
            grad = np.zeros((count, dim))
            grad[:, index] = 1.0
            return x[:, index].astype(np.float64, copy=True), grad, np.zeros(count, dtype=bool)
        case Neg(operand=operand):
            value, grad, kink = _forward(operand, x, t)
            return -value, -grad, kink
        case BinOp(op=op, left=left, right=right):
            lv, lg, lk = _forward(left, x, t)
            rv, rg, rk = _forward(right, x, t)
            kink = lk | rk
            match op:
                case "+":
                    return lv + rv, lg + rg, kink
                case "-":
                    return lv - rv, lg - rg, kink
                case "*":
                    return lv * rv, lg * rv[:, None] + lv[:, None] * rg, kink
            grad = (lg * rv[:, None] - lv[:, None] * rg) / (rv**2)[:, None]
            return lv / rv, grad, kink
        case Pow(base=base, exponent=exponent):
            value, grad, kink = _forward(base, x, t)
            if exponent == 0:
                return np.ones(count), np.zeros((count, dim)), kink
            outer = exponent * np.power(value, float(exponent - 1))
            return np.power(value, float(exponent)), outer[:, None] * grad, kink
        case Call(name=name, args=args):
            return _forward_call(name, [_forward(arg, x, t) for arg in args])
    raise TypeError(f"Unknown node {node!r}")  # pragma: nocover


def _forward_call(
    name: str, args: list[tuple[FloatArray, FloatArray, BoolArray]]
) -> tuple[FloatArray, FloatArray, BoolArray]:
    """Apply the chain rule for a function call.

    Args:
        name: The function name.
        args: Forward mode triples of the arguments.

    Returns:
        Forward mode triple of the call.
    """
    value, grad, kink = args[0]
    if name in ("min", "max"):
        other, other_grad, other_kink = args[1]
        pick_first = value <= other if name == "min" else value >= other
        result = np.where(pick_first, value, other)
        result_grad = np.where(pick_first[:, None], grad, other_grad)
        kink = kink | other_kink | (np.abs(value - other) <= KINK_TOLERANCE)
        return result, result_grad, kink
    match name:
        case "sin":
            result, slope = np.sin(value), np.cos(value)
        case "cos":
            result, slope = np.cos(value), -np.sin(value)
        case "exp":
            result = np.exp(value)
            slope = result
        case "log":
            result, slope = np.log(value), 1.0 / value
        case "abs":
            result, slope = np.abs(value), np.sign(value)
            kink = kink | (np.abs(value) <= KINK_TOLERANCE)
        case "sqrt":
            result = np.sqrt(value)
            slope = 0.5 / result
        case _:
            result = np.tanh(value)
            slope = 1.0 - result**2
    return result, slope[:, None] * grad, kink


def _broadcast(xs: FloatArray | Sequence[Sequence[float]], t: float | FloatArray, dim: int):
    """Normalize evaluation arguments.

    Args:
        xs: The states, shape (N, m) or (m,).
        t: The time, scalar or shape (N,).
        dim: The declared dimension.

    Raises:
        DimensionMismatchError: If the state dimension differs from the declared one.

    Returns:
        States of shape (N, m) and times of shape (N,).
    """
    x = np.atleast_2d(np.asarray(xs, dtype=np.float64))
    if x.shape[1] != dim:
        raise DimensionMismatchError(f"Expected points of dimension {dim}, got {x.shape[1]}")
    times = np.broadcast_to(np.asarray(t, dtype=np.float64), (x.shape[0],))
    return x, times


@dataclasses.dataclass(frozen=True)
class Expr:
    """Immutable scalar expression over x1..x<dim> and t.

    Attributes:
        root: The syntax tree.
        dim: The declared state dimension.
    """

    root: Node
    dim: int

    def __post_init__(self) -> None:
        """Validate the variable indices.

        Raises:
            VariableOutOfRangeError: If a variable index exceeds the dimension.
        """
        for node in iter_nodes(self.root):
            if isinstance(node, Var) and not 0 <= node.index < self.dim:
                raise VariableOutOfRangeError(
                    f"Variable x{node.index + 1} is out of range 1..{self.dim}"
                )

    @property
    def text(self) -> str:
        """The pretty-printed source."""
        return to_text(self.root)

    @property
    def is_constant(self) -> bool:
        """Whether the expression references no variable."""
        return not any(isinstance(node, (Var, Time)) for node in iter_nodes(self.root))

    @property
    def depends_on_time(self) -> bool:
        """Whether the expression references t."""
        return any(isinstance(node, Time) for node in iter_nodes(self.root))

    @property
    def has_kinks(self) -> bool:
        """Whether the expression applies abs, min or max."""
        return any(
            isinstance(node, Call) and node.name in KINK_FUNCTIONS
            for node in iter_nodes(self.root)
        )

    def evaluate_many(self, xs: FloatArray, t: float | FloatArray = 0.0) -> FloatArray:
        """Evaluate at many points.

        Args:
            xs: The states, shape (N, m).
            t: The time, scalar or shape (N,).

        Returns:
            The values, NaN or Inf where the expression is undefined.
        """
        x, times = _broadcast(xs, t, self.dim)
        with np.errstate(all="ignore"):
            return _values(self.root, x, times)

    def evaluate(self, point: EvalPoint) -> float:
        """Evaluate at a point.

        Args:
            point: The argument (t, x).

        Raises:
            ExpressionDomainError: If the value is not finite.

        Returns:
            The value.
        """
        value = float(self.evaluate_many(np.asarray([point.x]), point.t)[0])
        if not math.isfinite(value):
            raise ExpressionDomainError(f"{self.text} is undefined at {point}")
        return value

    def gradient_many(
        self, xs: FloatArray, t: float | FloatArray = 0.0
    ) -> tuple[FloatArray, FloatArray, BoolArray]:
        """Evaluate values and gradients at many points.

        Args:
            xs: The states, shape (N, m).
            t: The time, scalar or shape (N,).

        Returns:
            Values (N,), gradients (N, m) and a mask of points on kinks (N,).
        """
        x, times = _broadcast(xs, t, self.dim)
        with np.errstate(all="ignore"):
            return _forward(self.root, x, times)

    def gradient(self, point: EvalPoint) -> FloatArray:
        """Exact gradient with respect to x at a point.

        Args:
            point: The argument (t, x).

        Raises:
            NonDifferentiablePointError: If the point lies on a kink of abs, min or max.
            ExpressionDomainError: If the value or gradient is not finite.

        Returns:
            The gradient vector of length dim.
        """
        value, grad, kink = self.gradient_many(np.asarray([point.x]), point.t)
        if kink[0]:
            raise NonDifferentiablePointError(f"{self.text} has a kink at {point}")
        if not (math.isfinite(float(value[0])) and np.all(np.isfinite(grad[0]))):
            raise ExpressionDomainError(f"{self.text} is not differentiable at {point}")
        return grad[0]


def parse(text: str, dim: int) -> Expr:
    """Parse expression text.

    Args:
        text: The expression source.
        dim: The declared state dimension.

    Raises:
        ExpressionSyntaxError: If the text is empty or malformed.
        ValueError: If the dimension is not positive.

    Returns:
        The parsed expression.
    """
    if dim < 1:
        raise ValueError(f"Dimension must be positive, got {dim}")
    if not text.strip():
        raise ExpressionSyntaxError("Empty expression", position=0, expected=("number",))
    root = _Parser(text, dim).parse()
    logger.debug("Parsed %r as %s.", text, to_text(root))
    return Expr(root=root, dim=dim)


def constant(value: float) -> Node:
    """Build a literal node that prints and reparses identically.

    Args:
        value: The literal value.

    Returns:
        A Const node, wrapped in Neg for negative values.
    """
    if value < 0 or (value == 0 and math.copysign(1.0, value) < 0):
        return Neg(operand=Const(value=-float(value)))
    return Const(value=float(value))


def squared_distance(nodes: Sequence[Node], center: Sequence[float]) -> Node:
    """Build sum_i (nodes_i - center_i)^2.

    Args:
        nodes: The component nodes.
        center: The reference values.

    Returns:
        The squared distance node.
    """
    terms: list[Node] = [
        Pow(base=BinOp(op="-", left=node, right=constant(value)), exponent=2)
        for node, value in zip(nodes, center)
    ]
    total = terms[0]
    for term in terms[1:]:
        total = BinOp(op="+", left=total, right=term)
    return total


def ball_margin(nodes: Sequence[Node], center: Sequence[float], radius: float) -> Node:
    """Build radius^2 - |nodes - center|^2, positive inside the open ball.

    Args:
        nodes: The component nodes.
        center: The ball center.
        radius: The ball radius.

    Returns:
        The margin node.
    """
    return BinOp(
        op="-", left=constant(radius * radius), right=squared_distance(nodes, center)
    )
