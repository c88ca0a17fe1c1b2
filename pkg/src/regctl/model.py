"""Parametric QPs with polynomial state dependence, and control-affine dynamics.

A :class:`ParametricQp` describes, for each state ``x``, the program::

    minimize    1/2 u' Q(x) u + c(x)' u
    subject to  A(x) u >= b(x)

The constraint orientation ``A u >= b`` is used throughout the package; the
``g(x, u) <= 0`` form is recovered as ``g = b - A u``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from regctl.poly import MAX_DEGREE, DimensionError, PolyBatch, PolyExpr, lie_derivative
from regctl.qp import QpInstance


class ProblemSpecError(ValueError):
    """Malformed problem-spec document."""

    def __init__(self, message: str, where: str | None = None, line: int | None = None):
        self.where = where
        self.line = line
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if where:
            loc.append(where)
        super().__init__(f"{': '.join([', '.join(loc), message]) if loc else message}")


def _check_degree(p: PolyExpr, where: str) -> None:
    if p.degree > MAX_DEGREE:
        raise ProblemSpecError(f"degree {p.degree} exceeds the cap of {MAX_DEGREE}", where)


@dataclass(frozen=True, eq=True)
class ParametricQp:
    """Quadratic program whose data are polynomials in the state.

    ``Q`` is stored as its upper triangle; entries below the diagonal are
    ignored and mirrored from above on evaluation.
    """

    n: int
    m: int
    Q: tuple[tuple[PolyExpr, ...], ...]
    c: tuple[PolyExpr, ...]
    A: tuple[tuple[PolyExpr, ...], ...]
    b: tuple[PolyExpr, ...]
    name: str = "program"
    _batch: PolyBatch | None = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        n, m = self.n, self.m
        if n < 1 or m < 1:
            raise DimensionError("state and input dimensions must be positive")
        Q = tuple(tuple(row) for row in self.Q)
        A = tuple(tuple(row) for row in self.A)
        if len(Q) != m or any(len(row) != m for row in Q):
            raise DimensionError(f"Q must be {m}x{m}")
        if len(self.c) != m:
            raise DimensionError(f"c must have length {m}")
        if len(A) != len(self.b) or any(len(row) != m for row in A):
            raise DimensionError(f"A must be {len(self.b)}x{m} to match b")
        zero = PolyExpr.zero(n)
        Q = tuple(tuple(Q[i][j] if j >= i else zero for j in range(m)) for i in range(m))
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "c", tuple(self.c))
        object.__setattr__(self, "b", tuple(self.b))
        for label, polys in (("Q", [q for row in Q for q in row]), ("c", self.c),
                             ("A", [a for row in A for a in row]), ("b", self.b)):
            for p in polys:
                if p.num_vars != n:
                    raise DimensionError(f"{label} entry has {p.num_vars} variables, expected {n}")
                _check_degree(p, label)
        polys = [q for row in Q for q in row] + list(self.c) + [a for row in A for a in row] + list(self.b)
        object.__setattr__(self, "_batch", PolyBatch(polys, n))

    @property
    def p(self) -> int:
        return len(self.b)

    def evaluate(self, x: Sequence[float]) -> QpInstance:
        """Freeze the state: numeric ``(Q, c, A, b)`` at ``x``."""
        m, p = self.m, self.p
        vals = self._batch(x)
        Q = vals[: m * m].reshape(m, m)
        Q = np.triu(Q) + np.triu(Q, 1).T
        off = m * m
        c = vals[off: off + m]
        off += m
        A = vals[off: off + p * m].reshape(p, m)
        b = vals[off + p * m:]
        return QpInstance(Q, c.copy(), A.copy(), b.copy())


@dataclass(frozen=True)
class ControlAffineSystem:
    """``xdot = F0(x) + sum_i u_i F_i(x)``."""

    n: int
    m: int
    drift: tuple[PolyExpr, ...]
    inputs: tuple[tuple[PolyExpr, ...], ...]
    _batch: PolyBatch | None = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "drift", tuple(self.drift))
        object.__setattr__(self, "inputs", tuple(tuple(f) for f in self.inputs))
        if len(self.drift) != self.n:
            raise DimensionError(f"drift must have {self.n} components")
        if len(self.inputs) != self.m or any(len(f) != self.n for f in self.inputs):
            raise DimensionError(f"need {self.m} input fields with {self.n} components each")
        for p in list(self.drift) + [q for f in self.inputs for q in f]:
            if p.num_vars != self.n:
                raise DimensionError("vector field entry has wrong number of variables")
        polys = list(self.drift) + [q for f in self.inputs for q in f]
        object.__setattr__(self, "_batch", PolyBatch(polys, self.n))

    def fields_at(self, x) -> tuple[np.ndarray, np.ndarray]:
        """``(F0(x), G(x))`` where column ``i`` of ``G`` is ``F_{i+1}(x)``."""
        vals = self._batch(np.asarray(x, dtype=float))
        return vals[: self.n], vals[self.n:].reshape(self.m, self.n).T

    def __call__(self, x, u) -> np.ndarray:
        u = np.asarray(u, dtype=float).reshape(-1)
        if u.shape[0] != self.m:
            raise DimensionError(f"input has length {u.shape[0]}, expected {self.m}")
        f0, G = self.fields_at(x)
        return f0 + G @ u

    def lie_rows(self, h: PolyExpr) -> tuple[PolyExpr, list[PolyExpr]]:
        """``(L_{F0} h, [L_{F1} h, ..., L_{Fm} h])``."""
        return lie_derivative(h, self.drift), [lie_derivative(h, f) for f in self.inputs]

    @classmethod
    def integrator(cls, n: int) -> ControlAffineSystem:
        """``xdot = u`` with ``m = n``."""
        zero = PolyExpr.zero(n)
        inputs = [[PolyExpr.constant(n, 1.0) if i == j else zero for i in range(n)] for j in range(n)]
        return cls(n, n, [zero] * n, inputs)


# problem-spec documents (JSON)


def _terms(obj, n: int, where: str) -> PolyExpr:
    if not isinstance(obj, list):
        raise ProblemSpecError("terms must be a list", where)
    raw = []
    for k, t in enumerate(obj):
        loc = f"{where}[{k}]"
        if not isinstance(t, dict) or "coeff" not in t or "powers" not in t:
            raise ProblemSpecError("term needs 'coeff' and 'powers'", loc)
        coeff, powers = t["coeff"], t["powers"]
        if isinstance(coeff, bool) or not isinstance(coeff, (int, float)) or not math.isfinite(coeff):
            raise ProblemSpecError(f"coefficient must be a finite number, got {coeff!r}", loc)
        if not isinstance(powers, list) or any(isinstance(e, bool) or not isinstance(e, int) or e < 0 for e in powers):
            raise ProblemSpecError("powers must be a list of non-negative integers", loc)
        if len(powers) != n:
            raise ProblemSpecError(f"powers has length {len(powers)}, expected n={n}", loc)
        raw.append((tuple(powers), float(coeff)))
    poly = PolyExpr(n, raw)
    _check_degree(poly, where)
    return poly


def _index(entry: dict, key: str, bound: int, where: str) -> int:
    v = entry.get(key)
    if isinstance(v, bool) or not isinstance(v, int) or not 0 <= v < bound:
        raise ProblemSpecError(f"'{key}' must be an integer in [0, {bound})", where)
    return v


def _line_of(text: str, needle: str) -> int | None:
    pos = text.find(needle)
    return text.count("\n", 0, pos) + 1 if pos >= 0 else None


def load_problem(text: str) -> ParametricQp:
    """Parse a JSON problem-spec document into a :class:`ParametricQp`."""
    try:
        doc = json.loads(text, parse_constant=lambda c: float(c))
    except json.JSONDecodeError as exc:
        raise ProblemSpecError(exc.msg, f"column {exc.colno}", exc.lineno) from None
    try:
        return _build(doc)
    except ProblemSpecError as exc:
        if exc.line is None and exc.where:
            top = exc.where.split("[")[0].split(".")[0]
            exc = ProblemSpecError(str(exc), None, _line_of(text, f'"{top}"'))
        raise exc from None


def _build(doc) -> ParametricQp:
    if not isinstance(doc, dict):
        raise ProblemSpecError("document must be a JSON object")
    for key in ("n", "m"):
        v = doc.get(key)
        if isinstance(v, bool) or not isinstance(v, int) or v < 1:
            raise ProblemSpecError(f"'{key}' must be a positive integer", key)
    n, m = doc["n"], doc["m"]
    p = doc.get("p", 0)
    if isinstance(p, bool) or not isinstance(p, int) or p < 0:
        raise ProblemSpecError("'p' must be a non-negative integer", "p")
    name = str(doc.get("name", "program"))
    zero = PolyExpr.zero(n)

    Q = [[zero] * m for _ in range(m)]
    lower: dict[tuple[int, int], PolyExpr] = {}
    for k, e in enumerate(doc.get("Q", [])):
        loc = f"Q[{k}]"
        i, j = _index(e, "row", m, loc), _index(e, "col", m, loc)
        poly = _terms(e.get("terms"), n, f"{loc}.terms")
        if i <= j:
            Q[i][j] = Q[i][j] + poly
        else:
            lower[(j, i)] = lower.get((j, i), zero) + poly
    for (i, j), poly in lower.items():
        if Q[i][j] != poly:
            raise ProblemSpecError(f"asymmetric Q: entry ({j},{i}) does not mirror ({i},{j})", "Q")

    c = [zero] * m
    for k, e in enumerate(doc.get("c", [])):
        loc = f"c[{k}]"
        i = _index(e, "row", m, loc)
        c[i] = c[i] + _terms(e.get("terms"), n, f"{loc}.terms")

    A = [[zero] * m for _ in range(p)]
    for k, e in enumerate(doc.get("A", [])):
        loc = f"A[{k}]"
        i, j = _index(e, "row", p, loc), _index(e, "col", m, loc)
        A[i][j] = A[i][j] + _terms(e.get("terms"), n, f"{loc}.terms")

    b = [zero] * p
    for k, e in enumerate(doc.get("b", [])):
        loc = f"b[{k}]"
        i = _index(e, "row", p, loc)
        b[i] = b[i] + _terms(e.get("terms"), n, f"{loc}.terms")

    return ParametricQp(n, m, Q, c, A, b, name=name)


def dump_problem(prog: ParametricQp) -> str:
    """Serialize to the JSON problem-spec format (canonical, zero entries omitted)."""
    doc = {
        "name": prog.name,
        "n": prog.n,
        "m": prog.m,
        "p": prog.p,
        "Q": [{"row": i, "col": j, "terms": prog.Q[i][j].to_terms()}
              for i in range(prog.m) for j in range(i, prog.m) if not prog.Q[i][j].is_zero()],
        "c": [{"row": i, "terms": t.to_terms()} for i, t in enumerate(prog.c) if not t.is_zero()],
        "A": [{"row": i, "col": j, "terms": prog.A[i][j].to_terms()}
              for i in range(prog.p) for j in range(prog.m) if not prog.A[i][j].is_zero()],
        "b": [{"row": i, "terms": t.to_terms()} for i, t in enumerate(prog.b) if not t.is_zero()],
    }
    lines = ["{"]
    keys = list(doc)
    for k, key in enumerate(keys):
        val = doc[key]
        tail = "," if k < len(keys) - 1 else ""
        if isinstance(val, list) and val:
            lines.append(f"  {json.dumps(key)}: [")
            lines.extend(f"    {json.dumps(e)}{',' if j < len(val) - 1 else ''}" for j, e in enumerate(val))
            lines.append(f"  ]{tail}")
        else:
            lines.append(f"  {json.dumps(key)}: {json.dumps(val)}{tail}")
    lines.append("}")
    return "\n".join(lines)


def load_problem_file(path: str | Path) -> ParametricQp:
    return load_problem(Path(path).read_text())
