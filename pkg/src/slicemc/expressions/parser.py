"""Tokenizer and recursive-descent parser for the input languages.

Two entry points share one grammar skeleton:

* :func:`parse_polynomial` builds a :class:`Polynomial` directly, rejecting
  anything outside the polynomial fragment (function calls, division by a
  non-constant, negative or non-literal exponents).
* :func:`parse_scalar` builds a :class:`ScalarExpression` tree and accepts
  the full language including unary functions and signed integer powers.

Multiplication is always explicit (``x*y``, never ``xy``), ``^`` binds a
literal integer exponent, and whitespace is insignificant.  Errors carry
1-based line and column positions.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import ParseError
from .polynomial import Polynomial
from .scalar import (
    FUNCTION_NAMES,
    Binary,
    Const,
    Node,
    Power,
    ScalarExpression,
    Unary,
    Var,
)

_TOKEN_RE = re.compile(
    r"""
    (?P<number>(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z][A-Za-z0-9_]*)
  | (?P<op>[-+*/^()])
  | (?P<ws>\s+)
  | (?P<bad>.)
    """,
    re.VERBOSE,
)


@dataclass
class Token:
    kind: str  # number | ident | op | end
    text: str
    line: int
    column: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    line, col = 1, 1
    for m in _TOKEN_RE.finditer(text):
        kind = m.lastgroup
        piece = m.group()
        if kind == "bad":
            raise ParseError(f"unexpected character {piece!r}", line, col)
        if kind != "ws":
            tokens.append(Token(kind, piece, line, col))
        newlines = piece.count("\n")
        if newlines:
            line += newlines
            col = len(piece) - piece.rfind("\n")
        else:
            col += len(piece)
    tokens.append(Token("end", "", line, col))
    return tokens


class _Parser:
    """Precedence-climbing parser parameterized by the node algebra."""

    def __init__(self, text: str, variables: tuple[str, ...], mode: str):
        self.text = text
        self.variables = tuple(variables)
        self.mode = mode  # "polynomial" | "scalar"
        self.tokens = tokenize(text)
        self.pos = 0

    # -- token plumbing -------------------------------------------------

    @property
    def current(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, op: str):
        tok = self.current
        if tok.kind != "op" or tok.text != op:
            raise ParseError(f"expected {op!r}, found {tok.text or 'end of input'!r}",
                             tok.line, tok.column)
        return self.advance()

    def error(self, message: str, tok: Token | None = None):
        tok = tok or self.current
        raise ParseError(message, tok.line, tok.column)

    # -- grammar --------------------------------------------------------

    def parse(self):
        node = self.expr()
        if self.current.kind != "end":
            self.error(f"unexpected {self.current.text!r} after expression")
        return node

    def expr(self):
        node = self.term()
        while self.current.kind == "op" and self.current.text in "+-":
            op = self.advance().text
            rhs = self.term()
            node = self.combine(op, node, rhs)
        return node

    def term(self):
        node = self.factor()
        while self.current.kind == "op" and self.current.text in "*/":
            op = self.advance().text
            rhs = self.factor()
            node = self.combine(op, node, rhs)
        return node

    def factor(self):
        negate = False
        while self.current.kind == "op" and self.current.text in "+-":
            if self.advance().text == "-":
                negate = not negate
        node = self.power()
        if negate:
            node = self.negate(node)
        return node

    def power(self):
        node = self.atom()
        while self.current.kind == "op" and self.current.text == "^":
            op_tok = self.advance()
            node = self.apply_power(node, self.exponent_literal(op_tok))
        return node

    def exponent_literal(self, op_tok: Token) -> int:
        sign = 1
        if self.current.kind == "op" and self.current.text in "+-":
            if self.mode == "polynomial":
                self.error("exponents must be nonnegative integer literals")
            if self.advance().text == "-":
                sign = -1
        tok = self.current
        if tok.kind != "number" or not re.fullmatch(r"\d+", tok.text):
            self.error("exponent must be an integer literal", tok)
        self.advance()
        return sign * int(tok.text)

    def atom(self):
        tok = self.current
        if tok.kind == "number":
            self.advance()
            return self.number(float(tok.text))
        if tok.kind == "ident":
            self.advance()
            if self.current.kind == "op" and self.current.text == "(":
                if self.mode == "polynomial":
                    self.error("function calls are not allowed in polynomials", tok)
                if tok.text not in FUNCTION_NAMES:
                    self.error(f"unknown function {tok.text!r}", tok)
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return Unary(tok.text, arg)
            if tok.text not in self.variables:
                self.error(f"unknown identifier {tok.text!r}", tok)
            return self.var(tok.text)
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            node = self.expr()
            self.expect_op(")")
            return node
        self.error(f"expected a value, found {tok.text or 'end of input'!r}", tok)

    # -- node algebra, overridden per mode ------------------------------

    def number(self, value: float):
        raise NotImplementedError

    def var(self, name: str):
        raise NotImplementedError

    def negate(self, node):
        raise NotImplementedError

    def combine(self, op: str, left, right):
        raise NotImplementedError

    def apply_power(self, node, exponent: int):
        raise NotImplementedError


class _PolynomialParser(_Parser):
    def __init__(self, text, variables):
        super().__init__(text, variables, "polynomial")

    def number(self, value):
        return Polynomial.constant(value, self.variables)

    def var(self, name):
        return Polynomial.variable(name, self.variables)

    def negate(self, node):
        return -node

    def combine(self, op, left, right):
        if op == "+":
            return left + right
        if op == "-":
            return left - right
        if op == "*":
            return left * right
        if not right.is_constant():
            self.error("division by a non-constant is not polynomial")
        divisor = right.constant_value()
        if divisor == 0.0:
            self.error("division by zero")
        return left / divisor

    def apply_power(self, node, exponent):
        return node**exponent


class _ScalarParser(_Parser):
    def __init__(self, text, variables):
        super().__init__(text, variables, "scalar")

    def number(self, value):
        return Const(value)

    def var(self, name):
        return Var(self.variables.index(name), name)

    def negate(self, node):
        return Unary("neg", node)

    def combine(self, op, left, right):
        return Binary(op, left, right)

    def apply_power(self, node, exponent):
        return Power(node, exponent)


def parse_polynomial(text: str, variables) -> Polynomial:
    """Parse ``text`` as a polynomial over the ordered ``variables``."""
    return _PolynomialParser(text, tuple(variables)).parse()


def parse_scalar(text: str, variables) -> ScalarExpression:
    """Parse ``text`` as a scalar expression over the ordered ``variables``."""
    root = _ScalarParser(text, tuple(variables)).parse()
    return ScalarExpression(root, tuple(variables), source=text)
