"""Multivariate polynomials in the state variables.

Polynomials are stored in canonical form: a mapping from exponent tuples to
non-zero finite coefficients.  They are immutable and hashable so that
structural equality (``==``) is meaningful.
"""

from __future__ import annotations

import math
import re
from typing import Iterable, Mapping, Sequence

import numpy as np

MAX_DEGREE = 8


class DimensionError(ValueError):
    """Raised when polynomial/vector dimensions do not match."""


class PolyExpr:
    """Polynomial ``sum_k coeff_k * prod_i x_i**powers_k[i]`` in ``num_vars`` variables."""

    __slots__ = ("num_vars", "_terms", "_hash")

    def __init__(self, num_vars: int, terms: Mapping[tuple[int, ...], float] | Iterable = ()):
        if int(num_vars) != num_vars or num_vars < 1:
            raise ValueError(f"num_vars must be a positive integer, got {num_vars!r}")
        self.num_vars = int(num_vars)
        items = terms.items() if isinstance(terms, Mapping) else terms

        merged: dict[tuple[int, ...], float] = {}
        for item in items:
            if isinstance(item, Mapping):
                powers, coeff = item["powers"], item["coeff"]
            else:
                powers, coeff = item
            powers = tuple(int(p) for p in powers)
            if len(powers) != self.num_vars:
                raise DimensionError(
                    f"term powers {powers} have length {len(powers)}, expected {self.num_vars}"
                )
            if any(p < 0 for p in powers):
                raise ValueError(f"negative exponent in {powers}")
            coeff = float(coeff)
            if not math.isfinite(coeff):
                raise ValueError(f"non-finite coefficient {coeff} for powers {powers}")
            merged[powers] = merged.get(powers, 0.0) + coeff

        self._terms = {p: c for p, c in sorted(merged.items()) if c != 0.0}
        self._hash = None

    # construction helpers

    @classmethod
    def constant(cls, num_vars: int, value: float) -> PolyExpr:
        return cls(num_vars, {(0,) * num_vars: value})

    @classmethod
    def zero(cls, num_vars: int) -> PolyExpr:
        return cls(num_vars)

    @classmethod
    def var(cls, num_vars: int, index: int, coeff: float = 1.0) -> PolyExpr:
        """The monomial ``coeff * x_index`` (0-based index)."""
        if not 0 <= index < num_vars:
            raise DimensionError(f"variable index {index} out of range for {num_vars} variables")
        powers = [0] * num_vars
        powers[index] = 1
        return cls(num_vars, {tuple(powers): coeff})

    # structure

    @property
    def terms(self) -> dict[tuple[int, ...], float]:
        return dict(self._terms)

    @property
    def degree(self) -> int:
        return max((sum(p) for p in self._terms), default=0)

    def is_zero(self) -> bool:
        return not self._terms

    def is_constant(self) -> bool:
        return all(sum(p) == 0 for p in self._terms)

    def to_terms(self) -> list[dict]:
        return [{"coeff": c, "powers": list(p)} for p, c in self._terms.items()]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PolyExpr):
            return NotImplemented
        return self.num_vars == other.num_vars and self._terms == other._terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.num_vars, tuple(self._terms.items())))
        return self._hash

    def __repr__(self) -> str:
        return f"PolyExpr({self.num_vars}, {format_poly(self)!r})"

    # arithmetic

    def _coerce(self, other) -> PolyExpr:
        if isinstance(other, PolyExpr):
            if other.num_vars != self.num_vars:
                raise DimensionError(f"num_vars mismatch: {self.num_vars} vs {other.num_vars}")
            return other
        if isinstance(other, (int, float, np.floating, np.integer)):
            return PolyExpr.constant(self.num_vars, float(other))
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return poly_add(self, other)

    __radd__ = __add__

    def __neg__(self) -> PolyExpr:
        return PolyExpr(self.num_vars, {p: -c for p, c in self._terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return poly_add(self, -other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return poly_add(other, -self)

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return poly_mul(self, other)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> PolyExpr:
        if int(k) != k or k < 0:
            raise ValueError("only non-negative integer powers are supported")
        out = PolyExpr.constant(self.num_vars, 1.0)
        for _ in range(int(k)):
            out = out * self
        return out

    def __call__(self, x) -> float:
        return poly_eval(self, x)


def poly_eval(expr: PolyExpr, x: Sequence[float]) -> float:
    """Evaluate ``expr`` at the point ``x``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != expr.num_vars:
        raise DimensionError(f"point has length {x.shape[0]}, expected {expr.num_vars}")
    total = 0.0
    for powers, coeff in expr._terms.items():
        term = coeff
        for xi, p in zip(x, powers):
            if p:
                term *= float(xi) ** p
        total += term
    return total


def poly_add(a: PolyExpr, b: PolyExpr) -> PolyExpr:
    if a.num_vars != b.num_vars:
        raise DimensionError(f"num_vars mismatch: {a.num_vars} vs {b.num_vars}")
    return PolyExpr(a.num_vars, list(a._terms.items()) + list(b._terms.items()))


def poly_mul(a: PolyExpr, b: PolyExpr) -> PolyExpr:
    if a.num_vars != b.num_vars:
        raise DimensionError(f"num_vars mismatch: {a.num_vars} vs {b.num_vars}")
    terms = []
    for pa, ca in a._terms.items():
        for pb, cb in b._terms.items():
            terms.append((tuple(i + j for i, j in zip(pa, pb)), ca * cb))
    return PolyExpr(a.num_vars, terms)


def poly_partial(a: PolyExpr, var_index: int) -> PolyExpr:
    """Partial derivative with respect to ``x_{var_index}`` (0-based)."""
    if not 0 <= var_index < a.num_vars:
        raise DimensionError(f"variable index {var_index} out of range for {a.num_vars} variables")
    terms = []
    for powers, coeff in a._terms.items():
        k = powers[var_index]
        if k:
            lowered = list(powers)
            lowered[var_index] = k - 1
            terms.append((tuple(lowered), coeff * k))
    return PolyExpr(a.num_vars, terms)


def gradient(a: PolyExpr) -> list[PolyExpr]:
    return [poly_partial(a, i) for i in range(a.num_vars)]


def lie_derivative(h: PolyExpr, field: Sequence[PolyExpr]) -> PolyExpr:
    """``grad(h) . field`` as a polynomial."""
    if len(field) != h.num_vars:
        raise DimensionError(f"field has {len(field)} components, expected {h.num_vars}")
    out = PolyExpr.zero(h.num_vars)
    for i, fi in enumerate(field):
        if fi.num_vars != h.num_vars:
            raise DimensionError("field component has wrong number of variables")
        out = out + poly_partial(h, i) * fi
    return out


class PolyBatch:
    """Vectorized evaluation of many polynomials sharing the same variables.

    Collects the union of monomials once; evaluating all polynomials at a
    point is then one power/product pass plus a matrix-vector product.
    """

    def __init__(self, polys: Sequence[PolyExpr], num_vars: int):
        monomials: dict[tuple[int, ...], int] = {}
        for p in polys:
            if p.num_vars != num_vars:
                raise DimensionError("polynomial has wrong number of variables")
            for powers in p._terms:
                monomials.setdefault(powers, len(monomials))
        self.num_vars = num_vars
        self.exponents = np.array(list(monomials) or [(0,) * num_vars], dtype=float).reshape(-1, num_vars)
        self.coeffs = np.zeros((len(polys), self.exponents.shape[0]))
        for row, p in enumerate(polys):
            for powers, c in p._terms.items():
                self.coeffs[row, monomials[powers]] = c

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape[0] != self.num_vars:
            raise DimensionError(f"point has length {x.shape[0]}, expected {self.num_vars}")
        # 0**0 == 1 in numpy, which is what a constant monomial needs
        mono = np.prod(x[None, :] ** self.exponents, axis=1)
        return self.coeffs @ mono


# inline expression grammar: "2*x1^2 - x2 + 0.5*x1*x2"

_TERM_SPLIT = re.compile(r"(?<![eE*^])([+-])")
_NUMBER = re.compile(r"^(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")
_VAR = re.compile(r"^x(\d+)(?:\^(\d+))?$")


def parse_poly(text: str, num_vars: int) -> PolyExpr:
    """Parse sums of products like ``"1 - x1^2 + 3*x1*x2"`` (variables are 1-based)."""
    src = text.replace(" ", "").replace("**", "^")
    if not src:
        raise ValueError("empty polynomial expression")
    if src[0] not in "+-":
        src = "+" + src
    pieces = _TERM_SPLIT.split(src)
    # split yields ['', sign, body, sign, body, ...]
    if pieces[0] != "" or len(pieces) % 2 == 0:
        raise ValueError(f"cannot parse polynomial {text!r}")
    terms = []
    for sign, body in zip(pieces[1::2], pieces[2::2]):
        if not body:
            raise ValueError(f"dangling sign in {text!r}")
        coeff = -1.0 if sign == "-" else 1.0
        powers = [0] * num_vars
        for factor in body.split("*"):
            if _NUMBER.match(factor):
                coeff *= float(factor)
                continue
            m = _VAR.match(factor)
            if not m:
                raise ValueError(f"bad factor {factor!r} in {text!r}")
            idx = int(m.group(1)) - 1
            if not 0 <= idx < num_vars:
                raise DimensionError(f"variable x{idx + 1} out of range for {num_vars} variables")
            powers[idx] += int(m.group(2) or 1)
        terms.append((tuple(powers), coeff))
    return PolyExpr(num_vars, terms)


def format_poly(expr: PolyExpr) -> str:
    if expr.is_zero():
        return "0"
    parts = []
    for powers, coeff in expr._terms.items():
        factors = [f"x{i + 1}" + (f"^{p}" if p > 1 else "") for i, p in enumerate(powers) if p]
        mag = abs(coeff)
        if factors:
            body = "*".join(([repr(mag)] if mag != 1.0 else []) + factors)
        else:
            body = repr(mag)
        parts.append(("-" if coeff < 0 else "+") + body)
    s = "".join(parts)
    return s[1:] if s.startswith("+") else s
