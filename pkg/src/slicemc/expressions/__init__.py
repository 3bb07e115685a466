from .parser import parse_polynomial, parse_scalar
from .polynomial import CompiledSystem, Polynomial, PolynomialSystem
from .scalar import ScalarExpression, constant_function

__all__ = [
    "CompiledSystem",
    "Polynomial",
    "PolynomialSystem",
    "ScalarExpression",
    "constant_function",
    "parse_polynomial",
    "parse_scalar",
]
