"""Dense two-phase simplex for small linear programs.

Variables are free; constraints are ``A_eq x = b_eq`` and ``A_ineq x >= b_ineq``.
Bland's rule (lowest index) is used for both entering and leaving choices, so
the method cannot cycle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LP_TOL = 1e-9


@dataclass
class LpResult:
    status: str  # "optimal" | "infeasible" | "unbounded" | "max_iterations"
    x: np.ndarray | None
    value: float | None
    iterations: int = 0


def _as2d(A, ncols: int) -> np.ndarray:
    if A is None:
        return np.zeros((0, ncols))
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return np.zeros((0, ncols))
    return A.reshape(-1, ncols)


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    for r in range(T.shape[0]):
        if r != row and T[r, col] != 0.0:
            T[r] -= T[r, col] * T[row]


def _simplex(T: np.ndarray, basis: list[int], ncols: int, tol: float, max_iter: int) -> tuple[str, int]:
    """Run Bland-rule simplex on tableau ``T`` (last row = reduced costs, last col = rhs).

    Only the first ``ncols`` columns may enter.  Minimizes.
    """
    it = 0
    while it < max_iter:
        cost = T[-1, :ncols]
        entering = next((j for j in range(ncols) if cost[j] < -tol), None)
        if entering is None:
            return "optimal", it
        col = T[:-1, entering]
        rhs = T[:-1, -1]
        best = None
        for i in range(len(basis)):
            if col[i] > tol:
                ratio = rhs[i] / col[i]
                if best is None or ratio < best[0] - tol or (abs(ratio - best[0]) <= tol and basis[i] < basis[best[1]]):
                    best = (ratio, i)
        if best is None:
            return "unbounded", it
        _pivot(T, best[1], entering)
        basis[best[1]] = entering
        it += 1
    return "max_iterations", it


def solve_lp(A_eq=None, b_eq=None, A_ineq=None, b_ineq=None, objective=None,
             sense: str = "min", lp_tol: float = LP_TOL, max_iter: int = 5000) -> LpResult:
    """Optimize ``objective @ x`` over free ``x`` subject to the given constraints."""
    if sense not in ("min", "max"):
        raise ValueError(f"sense must be 'min' or 'max', got {sense!r}")
    cvec = np.asarray(objective, dtype=float).reshape(-1)
    nx = cvec.shape[0]
    Aeq = _as2d(A_eq, nx)
    Ain = _as2d(A_ineq, nx)
    beq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).reshape(-1)
    bin_ = np.zeros(0) if b_ineq is None else np.asarray(b_ineq, dtype=float).reshape(-1)
    if Aeq.shape[0] != beq.shape[0] or Ain.shape[0] != bin_.shape[0]:
        raise ValueError("constraint matrix and right-hand side sizes differ")
    if sense == "max":
        cvec = -cvec

    meq, min_ = Aeq.shape[0], Ain.shape[0]
    rows = meq + min_
    # z = [x+, x-, slack]; inequality rows become A x - s = b
    nz = 2 * nx + min_
    M = np.zeros((rows, nz))
    M[:meq, :nx] = Aeq
    M[:meq, nx:2 * nx] = -Aeq
    M[meq:, :nx] = Ain
    M[meq:, nx:2 * nx] = -Ain
    M[meq:, 2 * nx:] = -np.eye(min_)
    r = np.concatenate([beq, bin_])
    flip = r < 0
    M[flip] *= -1
    r = np.where(flip, -r, r)
    cz = np.concatenate([cvec, -cvec, np.zeros(min_)])

    # phase 1: artificial per row
    T = np.zeros((rows + 1, nz + rows + 1))
    T[:rows, :nz] = M
    T[:rows, nz:nz + rows] = np.eye(rows)
    T[:rows, -1] = r
    T[-1, :nz] = -M.sum(axis=0)
    T[-1, -1] = -r.sum()
    basis = list(range(nz, nz + rows))
    status, it1 = _simplex(T, basis, nz, lp_tol, max_iter)
    if status == "max_iterations":
        return LpResult(status, None, None, it1)
    scale = 1.0 + (np.abs(r).max() if rows else 0.0)
    if -T[-1, -1] > lp_tol * scale:
        return LpResult("infeasible", None, None, it1)

    # drive remaining artificials out of the basis or drop redundant rows
    keep = []
    for i in range(rows):
        if basis[i] >= nz:
            j = next((j for j in range(nz) if abs(T[i, j]) > lp_tol), None)
            if j is None:
                continue
            _pivot(T, i, j)
            basis[i] = j
        keep.append(i)
    T2 = np.zeros((len(keep) + 1, nz + 1))
    T2[:-1, :nz] = T[keep, :nz]
    T2[:-1, -1] = T[keep, -1]
    basis = [basis[i] for i in keep]
    T2[-1, :nz] = cz
    for i, j in enumerate(basis):
        if T2[-1, j] != 0.0:
            T2[-1] -= T2[-1, j] * T2[i]

    status, it2 = _simplex(T2, basis, nz, lp_tol, max_iter)
    its = it1 + it2
    if status != "optimal":
        return LpResult(status, None, None, its)
    z = np.zeros(nz)
    for i, j in enumerate(basis):
        z[j] = T2[i, -1]
    x = z[:nx] - z[nx:2 * nx]
    value = float(np.asarray(objective, dtype=float).reshape(-1) @ x)
    return LpResult("optimal", x, value, its)
