"""Multivariate polynomials with a dense exponent-vector term map.

A polynomial is stored as ``{exponent_tuple: coefficient}`` over an ordered
variable tuple.  This keeps arithmetic, differentiation and printing simple
and makes the term data easy to compile into flat numpy arrays for the
solver hot paths (see :class:`CompiledSystem`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import SolverError


def _ipow(base, exponent: int):
    """Integer power by repeated multiplication.

    Used instead of ``**`` so that evaluating with complex inputs whose
    imaginary part is zero reproduces the real evaluation path bit for bit.
    """
    result = None
    acc = base
    e = exponent
    while e > 0:
        if e & 1:
            result = acc if result is None else result * acc
        e >>= 1
        if e:
            acc = acc * acc
    return 1.0 if result is None else result


@dataclass
class Polynomial:
    """A real-coefficient polynomial in named variables.

    ``terms`` maps exponent tuples (one entry per variable, in order) to
    nonzero coefficients.  Zero coefficients are dropped on construction,
    so two polynomials are equal iff their normalized term maps are equal.
    """

    variables: tuple[str, ...]
    terms: dict[tuple[int, ...], float] = field(default_factory=dict)

    def __post_init__(self):
        self.variables = tuple(self.variables)
        nvars = len(self.variables)
        clean: dict[tuple[int, ...], float] = {}
        for exps, coeff in self.terms.items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != nvars:
                raise ValueError(
                    f"exponent tuple {exps} does not match {nvars} variables"
                )
            if any(e < 0 for e in exps):
                raise ValueError(f"negative exponent in {exps}")
            coeff = float(coeff)
            if coeff != 0.0:
                clean[exps] = clean.get(exps, 0.0) + coeff
                if clean[exps] == 0.0:
                    del clean[exps]
        self.terms = clean

    # ------------------------------------------------------------------
    # constructors

    @classmethod
    def constant(cls, value: float, variables: tuple[str, ...]) -> "Polynomial":
        zero = tuple(0 for _ in variables)
        return cls(variables, {zero: float(value)} if value != 0.0 else {})

    @classmethod
    def variable(cls, name: str, variables: tuple[str, ...]) -> "Polynomial":
        idx = tuple(variables).index(name)
        exps = tuple(1 if j == idx else 0 for j in range(len(variables)))
        return cls(variables, {exps: 1.0})

    # ------------------------------------------------------------------
    # ring arithmetic

    def _check_same_vars(self, other: "Polynomial"):
        if self.variables != other.variables:
            raise ValueError(
                f"variable mismatch: {self.variables} vs {other.variables}"
            )

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = Polynomial.constant(other, self.variables)
        self._check_same_vars(other)
        terms = dict(self.terms)
        for exps, coeff in other.terms.items():
            terms[exps] = terms.get(exps, 0.0) + coeff
        return Polynomial(self.variables, terms)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.variables, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            other = Polynomial.constant(other, self.variables)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return Polynomial(
                self.variables, {e: c * other for e, c in self.terms.items()}
            )
        self._check_same_vars(other)
        terms: dict[tuple[int, ...], float] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                key = tuple(a + b for a, b in zip(e1, e2))
                terms[key] = terms.get(key, 0.0) + c1 * c2
        return Polynomial(self.variables, terms)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        if not isinstance(scalar, (int, float)):
            raise TypeError("polynomials can only be divided by numeric constants")
        return self * (1.0 / scalar)

    def __pow__(self, exponent: int):
        if exponent != int(exponent) or exponent < 0:
            raise ValueError("polynomial powers must be nonnegative integers")
        result = Polynomial.constant(1.0, self.variables)
        for _ in range(int(exponent)):
            result = result * self
        return result

    # ------------------------------------------------------------------
    # queries

    def total_degree(self) -> int:
        """Largest term degree; 0 for constants and the zero polynomial."""
        if not self.terms:
            return 0
        return max(sum(e) for e in self.terms)

    def is_constant(self) -> bool:
        return all(sum(e) == 0 for e in self.terms)

    def constant_value(self) -> float:
        if not self.is_constant():
            raise ValueError("polynomial is not constant")
        return next(iter(self.terms.values()), 0.0)

    def evaluate(self, point):
        """Evaluate at a point (sequence of scalars or numpy arrays).

        The result dtype follows the input: real in, real out; complex in,
        complex out.  The same multiply-and-add path is used for both, so
        complex inputs with zero imaginary part match the real path bitwise.
        """
        vals = list(point)
        if len(vals) != len(self.variables):
            raise ValueError(
                f"expected {len(self.variables)} coordinates, got {len(vals)}"
            )
        total = 0.0
        for exps, coeff in self.terms.items():
            mon = coeff
            for v, e in zip(vals, exps):
                if e:
                    mon = mon * _ipow(v, e)
            total = total + mon
        return total

    def differentiate(self, var: str) -> "Polynomial":
        """Partial derivative with respect to one variable."""
        idx = self.variables.index(var)
        terms: dict[tuple[int, ...], float] = {}
        for exps, coeff in self.terms.items():
            e = exps[idx]
            if e == 0:
                continue
            key = exps[:idx] + (e - 1,) + exps[idx + 1 :]
            terms[key] = terms.get(key, 0.0) + coeff * e
        return Polynomial(self.variables, terms)

    def shifted(self, offsets) -> "Polynomial":
        """Substitute ``x_j -> x_j + offsets[j]`` and expand."""
        offsets = list(offsets)
        if len(offsets) != len(self.variables):
            raise ValueError("offset length does not match variable count")
        result = Polynomial.constant(0.0, self.variables)
        for exps, coeff in self.terms.items():
            term = Polynomial.constant(coeff, self.variables)
            for name, e, s in zip(self.variables, exps, offsets):
                if e:
                    base = Polynomial.variable(name, self.variables) + float(s)
                    term = term * base**e
            result = result + term
        return result

    # ------------------------------------------------------------------
    # printing, parsable by parse_polynomial

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        ordered = sorted(
            self.terms.items(), key=lambda kv: (-sum(kv[0]), tuple(-e for e in kv[0]))
        )
        for i, (exps, coeff) in enumerate(ordered):
            mag = abs(coeff)
            factors = []
            for name, e in zip(self.variables, exps):
                if e == 1:
                    factors.append(name)
                elif e > 1:
                    factors.append(f"{name}^{e}")
            if not factors:
                body = repr(mag)
            elif mag == 1.0:
                body = "*".join(factors)
            else:
                body = "*".join([repr(mag)] + factors)
            if i == 0:
                parts.append(body if coeff >= 0 else f"-{body}")
            else:
                parts.append(f"+ {body}" if coeff >= 0 else f"- {body}")
        return " ".join(parts)

    __repr__ = __str__


@dataclass
class PolynomialSystem:
    """An ordered list of polynomials over a shared variable tuple."""

    polynomials: tuple[Polynomial, ...]

    def __post_init__(self):
        self.polynomials = tuple(self.polynomials)
        if not self.polynomials:
            raise ValueError("a system needs at least one polynomial")
        vars0 = self.polynomials[0].variables
        for p in self.polynomials[1:]:
            if p.variables != vars0:
                raise ValueError("all polynomials must share one variable tuple")
        self._jacobian_cache = None
        self._compiled_cache = {}

    @property
    def variables(self) -> tuple[str, ...]:
        return self.polynomials[0].variables

    @property
    def n_equations(self) -> int:
        return len(self.polynomials)

    @property
    def n_variables(self) -> int:
        return len(self.variables)

    def evaluate(self, point) -> np.ndarray:
        return np.array([p.evaluate(point) for p in self.polynomials])

    def jacobian_polynomials(self) -> tuple[tuple[Polynomial, ...], ...]:
        if self._jacobian_cache is None:
            self._jacobian_cache = tuple(
                tuple(p.differentiate(v) for v in self.variables)
                for p in self.polynomials
            )
        return self._jacobian_cache

    def jacobian_at(self, point) -> np.ndarray:
        rows = self.jacobian_polynomials()
        return np.array([[d.evaluate(point) for d in row] for row in rows])

    def bezout_number(self) -> int:
        """Product of total degrees, an upper bound on isolated solutions."""
        return math.prod(max(p.total_degree(), 0) for p in self.polynomials)

    def shifted(self, offsets) -> "PolynomialSystem":
        return PolynomialSystem(tuple(p.shifted(offsets) for p in self.polynomials))

    def compiled(self, derivatives: bool = False) -> "CompiledSystem":
        key = bool(derivatives)
        if key not in self._compiled_cache:
            if derivatives:
                flat = []
                rows = self.jacobian_polynomials()
                for row in rows:
                    flat.extend(row)
                self._compiled_cache[key] = CompiledSystem(
                    flat, shape=(self.n_equations, self.n_variables)
                )
            else:
                self._compiled_cache[key] = CompiledSystem(list(self.polynomials))
        return self._compiled_cache[key]

    def value_jacobian(self) -> "ValueJacobianEvaluator":
        if "pair" not in self._compiled_cache:
            self._compiled_cache["pair"] = ValueJacobianEvaluator(self)
        return self._compiled_cache["pair"]


class CompiledSystem:
    """Flat-array form of a list of polynomials for batched evaluation.

    Terms of all polynomials are stacked into one coefficient vector and one
    exponent matrix; evaluation builds a per-variable power table and gathers
    monomials from it, which is markedly faster than calling ``**`` per term.
    """

    def __init__(self, polynomials, shape: tuple[int, int] | None = None):
        polynomials = list(polynomials)
        if not polynomials:
            raise SolverError("cannot compile an empty system")
        nvars = len(polynomials[0].variables)
        n_out = len(polynomials)
        exps = []
        coeffs = []
        rows = []
        for i, p in enumerate(polynomials):
            for e, c in p.terms.items():
                exps.append(e)
                coeffs.append(c)
                rows.append(i)
        if exps:
            self.exponents = np.array(exps, dtype=np.int64)
            self.coeffs = np.array(coeffs, dtype=np.float64)
        else:
            self.exponents = np.zeros((0, nvars), dtype=np.int64)
            self.coeffs = np.zeros(0, dtype=np.float64)
        self.n_vars = nvars
        self.n_out = n_out
        self.shape = shape
        self.max_degree = int(self.exponents.max()) if len(coeffs) else 0
        # terms arrive grouped by output slot, so slot sums are contiguous
        # segments: record each nonempty slot and where its segment starts
        nonempty = []
        starts = []
        for t, i in enumerate(rows):
            if not nonempty or nonempty[-1] != i:
                nonempty.append(i)
                starts.append(t)
        self.slot_of_segment = np.array(nonempty, dtype=np.int64)
        self.segment_starts = np.array(starts, dtype=np.int64)
        # per-term slots listing only the variables with nonzero exponent,
        # so evaluation gathers (B, T, slots) instead of (B, T, n_vars)
        n_terms = len(coeffs)
        width = max(1, int((self.exponents > 0).sum(axis=1).max())) if n_terms else 1
        var_slot = np.zeros((n_terms, width), dtype=np.int64)
        exp_slot = np.zeros((n_terms, width), dtype=np.int64)
        for t in range(n_terms):
            s = 0
            for j in range(nvars):
                e = self.exponents[t, j]
                if e > 0:
                    var_slot[t, s] = j
                    exp_slot[t, s] = e
                    s += 1
        self.var_slot = var_slot
        self.exp_slot = exp_slot

    def _power_table(self, x: np.ndarray, max_degree: int) -> np.ndarray:
        B = x.shape[0]
        dtype = np.result_type(x.dtype, np.float64)
        table = np.empty((B, max_degree + 1, self.n_vars), dtype=dtype)
        table[:, 0, :] = 1.0
        for d in range(1, max_degree + 1):
            table[:, d, :] = table[:, d - 1, :] * x
        return table

    def _from_table(self, table: np.ndarray) -> np.ndarray:
        B = table.shape[0]
        if len(self.coeffs) == 0:
            out = np.zeros((B, self.n_out), dtype=table.dtype)
        else:
            monomials = table[:, self.exp_slot, self.var_slot].prod(axis=2)
            sums = np.add.reduceat(monomials * self.coeffs, self.segment_starts, axis=1)
            out = np.zeros((B, self.n_out), dtype=table.dtype)
            out[:, self.slot_of_segment] = sums
        if self.shape is not None:
            out = out.reshape((B,) + self.shape)
        return out

    def __call__(self, x: np.ndarray) -> np.ndarray:
        """Evaluate at a batch of points ``x`` of shape (B, n_vars).

        Returns (B, n_out), reshaped to (B,) + shape if one was given.
        A single point of shape (n_vars,) returns (n_out,) or shape.
        """
        x = np.asarray(x)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        out = self._from_table(self._power_table(x, self.max_degree))
        return out[0] if single else out


class ValueJacobianEvaluator:
    """Evaluates a system and its Jacobian from one shared power table."""

    def __init__(self, system: "PolynomialSystem"):
        self.values = system.compiled()
        self.jacobian = system.compiled(derivatives=True)
        self.max_degree = max(self.values.max_degree, self.jacobian.max_degree)

    def __call__(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x)
        table = self.values._power_table(x, self.max_degree)
        return self.values._from_table(table), self.jacobian._from_table(table)
