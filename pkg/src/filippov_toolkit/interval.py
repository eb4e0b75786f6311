# Copyright 2025 Canonical Ltd.
# See LICENSE file for licensing details.

"""Module for interval evaluation of expressions over arrays of boxes."""

import logging

import numpy as np

from filippov_toolkit.expr import (
    BinOp,
    Call,
    Const,
    Expr,
    FloatArray,
    Neg,
    Node,
    Pow,
    Time,
    Var,
)

logger = logging.getLogger(__name__)

Bounds = tuple[FloatArray, FloatArray]

_TWO_PI = 2.0 * np.pi


def _mul(lhs: Bounds, rhs: Bounds) -> Bounds:
    """Multiply intervals, treating 0 * inf as 0.

    Args:
        lhs: Left bounds.
        rhs: Right bounds.

    Returns:
        Product bounds.
    """
    products = np.stack(
        [lhs[0] * rhs[0], lhs[0] * rhs[1], lhs[1] * rhs[0], lhs[1] * rhs[1]]
    )
    products = np.where(np.isnan(products), 0.0, products)
    return products.min(axis=0), products.max(axis=0)


def _div(lhs: Bounds, rhs: Bounds) -> Bounds:
    """Divide intervals; a divisor containing 0 yields the whole line.

    Args:
        lhs: Dividend bounds.
        rhs: Divisor bounds.

    Returns:
        Quotient bounds.
    """
    straddles = (rhs[0] <= 0.0) & (rhs[1] >= 0.0)
    safe_low = np.where(straddles, 1.0, rhs[0])
    safe_high = np.where(straddles, 1.0, rhs[1])
    low, high = _mul(lhs, (1.0 / safe_high, 1.0 / safe_low))
    return np.where(straddles, -np.inf, low), np.where(straddles, np.inf, high)


def _pow(base: Bounds, exponent: int) -> Bounds:
    """Raise intervals to an integer power.

    Args:
        base: Base bounds.
        exponent: Integer exponent.

    Returns:
        Power bounds.
    """
    low, high = base
    if exponent == 0:
        return np.ones_like(low), np.ones_like(high)
    if exponent < 0:
        return _div((np.ones_like(low), np.ones_like(high)), _pow(base, -exponent))
    low_power, high_power = low**exponent, high**exponent
    if exponent % 2:
        return low_power, high_power
    return (
        np.where(low >= 0, low_power, np.where(high <= 0, high_power, 0.0)),
        np.maximum(low_power, high_power),
    )


def _periodic_contains(low: FloatArray, high: FloatArray, phase: float) -> FloatArray:
    """Whether [low, high] contains phase + 2 k pi for some integer k.

    Args:
        low: Lower bounds.
        high: Upper bounds.
        phase: The phase of the lattice.

    Returns:
        Boolean mask.
    """
    return np.ceil((low - phase) / _TWO_PI) <= np.floor((high - phase) / _TWO_PI)


def _sin(arg: Bounds, shift: float = 0.0) -> Bounds:
    """Bound sin(x + shift).

    Args:
        arg: Argument bounds.
        shift: Phase shift added to the argument.

    Returns:
        Bounds within [-1, 1].
    """
    low, high = arg[0] + shift, arg[1] + shift
    wide = ~np.isfinite(high - low) | (high - low >= _TWO_PI)
    ends = np.stack([np.sin(low), np.sin(high)])
    result_low = np.where(_periodic_contains(low, high, -np.pi / 2), -1.0, ends.min(axis=0))
    result_high = np.where(_periodic_contains(low, high, np.pi / 2), 1.0, ends.max(axis=0))
    return np.where(wide, -1.0, result_low), np.where(wide, 1.0, result_high)


def _call(name: str, args: list[Bounds]) -> Bounds:
    """Bound a function call.

    Args:
        name: The function name.
        args: Argument bounds.

    Returns:
        Call bounds.
    """
    low, high = args[0]
    match name:
        case "sin":
            return _sin(args[0])
        case "cos":
            return _sin(args[0], shift=np.pi / 2)
        case "exp":
            return np.exp(low), np.exp(high)
        case "tanh":
            return np.tanh(low), np.tanh(high)
        case "log":
            return np.log(np.maximum(low, 0.0)), np.log(high)
        case "sqrt":
            return np.sqrt(np.maximum(low, 0.0)), np.sqrt(high)
        case "abs":
            return (
                np.where(low >= 0, low, np.where(high <= 0, -high, 0.0)),
                np.maximum(np.abs(low), np.abs(high)),
            )
        case "min":
            return np.minimum(low, args[1][0]), np.minimum(high, args[1][1])
    return np.maximum(low, args[1][0]), np.maximum(high, args[1][1])


def _bounds(node: Node, lower: FloatArray, upper: FloatArray, t: float) -> Bounds:
    """Recursively bound a tree over boxes.

    Args:
        node: The root node.
        lower: Box lower corners, shape (N, m).
        upper: Box upper corners, shape (N, m).
        t: The fixed time.

    Returns:
        Lower and upper bounds, shape (N,) each.
    """
    count = lower.shape[0]
    match node:
        case Const(value=value):
            return np.full(count, value), np.full(count, value)
        case Var(index=index):
            return lower[:, index].copy(), upper[:, index].copy()
        case Time():
            return np.full(count, t), np.full(count, t)
        case Neg(operand=operand):
            low, high = _bounds(operand, lower, upper, t)
            return -high, -low
        case BinOp(op=op, left=left, right=right):
            lhs = _bounds(left, lower, upper, t)
            rhs = _bounds(right, lower, upper, t)
            match op:
                case "+":
                    return lhs[0] + rhs[0], lhs[1] + rhs[1]
                case "-":
                    return lhs[0] - rhs[1], lhs[1] - rhs[0]
                case "*":
                    return _mul(lhs, rhs)
            return _div(lhs, rhs)
        case Pow(base=base, exponent=exponent):
            return _pow(_bounds(base, lower, upper, t), exponent)
        case Call(name=name, args=args):
            return _call(name, [_bounds(arg, lower, upper, t) for arg in args])
    raise TypeError(f"Unknown node {node!r}")  # pragma: nocover


def bounds(expr: Expr, lower: FloatArray, upper: FloatArray, t: float = 0.0) -> Bounds:
    """Enclose the range of an expression over each box.

    Undefined parts (log or sqrt of negative numbers) widen the enclosure to the whole line, so
    the result is always a sound outer bound of the defined values.

    Args:
        expr: The expression.
        lower: Box lower corners, shape (N, m) or (m,).
        upper: Box upper corners, shape (N, m) or (m,).
        t: The fixed time.

    Returns:
        Lower and upper bounds, shape (N,) each.
    """
    lower = np.atleast_2d(np.asarray(lower, dtype=np.float64))
    upper = np.atleast_2d(np.asarray(upper, dtype=np.float64))
    with np.errstate(all="ignore"):
        low, high = _bounds(expr.root, lower, upper, t)
    undefined = np.isnan(low) | np.isnan(high)
    return np.where(undefined, -np.inf, low), np.where(undefined, np.inf, high)
