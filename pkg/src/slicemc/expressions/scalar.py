"""Scalar expression trees for integrands and observables.

A superset of the polynomial language: division by arbitrary subexpressions,
signed integer powers, and the unary functions exp, log, sqrt, acos, cos,
sin, abs.  Evaluation never returns NaN or infinity silently; any point
outside the real domain raises :class:`EvaluationDomainError` carrying the
offending coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EvaluationDomainError

_UNARY = {
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "acos": np.arccos,
    "cos": np.cos,
    "sin": np.sin,
    "abs": np.abs,
}

FUNCTION_NAMES = tuple(sorted(_UNARY))


@dataclass
class Node:
    pass


@dataclass
class Const(Node):
    value: float


@dataclass
class Var(Node):
    index: int
    name: str


@dataclass
class Unary(Node):
    op: str  # "neg" or a function name
    arg: Node


@dataclass
class Binary(Node):
    op: str  # + - * /
    left: Node
    right: Node


@dataclass
class Power(Node):
    base: Node
    exponent: int


class ScalarExpression:
    """An expression bound to an ordered variable tuple."""

    def __init__(self, root: Node, variables: tuple[str, ...], source: str = ""):
        self.root = root
        self.variables = tuple(variables)
        self.source = source

    def __repr__(self):
        src = self.source if self.source else "<expression>"
        return f"ScalarExpression({src!r}, variables={self.variables})"

    def evaluate(self, point) -> float:
        """Evaluate at one point, raising on any domain violation."""
        out = self.evaluate_many(np.asarray(point, dtype=float)[None, :])
        return float(out[0])

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        """Vectorized evaluation at an (P, n_vars) array of points."""
        points = np.asarray(points, dtype=float)
        if points.ndim != 2 or points.shape[1] != len(self.variables):
            raise ValueError(
                f"expected points of shape (P, {len(self.variables)})"
            )
        with np.errstate(all="ignore"):
            values = self._eval(self.root, points)
        values = np.broadcast_to(values, (points.shape[0],)).astype(float)
        bad = ~np.isfinite(values)
        if bad.any():
            raise EvaluationDomainError(
                "expression evaluated to a non-finite value",
                point=points[int(np.argmax(bad))],
            )
        return values

    def _fail(self, message, points, mask):
        mask = np.broadcast_to(mask, (points.shape[0],))
        raise EvaluationDomainError(message, point=points[int(np.argmax(mask))])

    def _eval(self, node: Node, pts: np.ndarray):
        if isinstance(node, Const):
            return np.float64(node.value)
        if isinstance(node, Var):
            return pts[:, node.index]
        if isinstance(node, Power):
            base = self._eval(node.base, pts)
            if node.exponent < 0:
                zero = base == 0.0
                if np.any(zero):
                    self._fail("zero raised to a negative power", pts, zero)
            return base ** float(node.exponent) if node.exponent < 0 else base ** node.exponent
        if isinstance(node, Binary):
            left = self._eval(node.left, pts)
            right = self._eval(node.right, pts)
            if node.op == "+":
                return left + right
            if node.op == "-":
                return left - right
            if node.op == "*":
                return left * right
            zero = right == 0.0
            if np.any(zero):
                self._fail("division by zero", pts, zero)
            return left / right
        if isinstance(node, Unary):
            arg = self._eval(node.arg, pts)
            op = node.op
            if op == "neg":
                return -arg
            if op == "log":
                bad = arg <= 0.0
                if np.any(bad):
                    self._fail("log of a non-positive value", pts, bad)
            elif op == "sqrt":
                bad = arg < 0.0
                if np.any(bad):
                    self._fail("sqrt of a negative value", pts, bad)
            elif op == "acos":
                # normalized inner products overshoot +-1 by round-off;
                # clamp inside a tiny margin, fail beyond it
                bad = (arg < -1.0 - 1e-9) | (arg > 1.0 + 1e-9)
                if np.any(bad):
                    self._fail("acos argument outside [-1, 1]", pts, bad)
                arg = np.clip(arg, -1.0, 1.0)
            return _UNARY[op](arg)
        raise TypeError(f"unknown node {node!r}")


def constant_function(value: float, variables: tuple[str, ...]) -> ScalarExpression:
    """The constant integrand, handy for plain volume estimates."""
    return ScalarExpression(Const(float(value)), variables, source=repr(float(value)))
