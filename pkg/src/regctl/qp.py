"""Primal active-set method for small dense convex QPs.

Solves ``min 1/2 u'Qu + c'u  s.t.  A u >= b`` with ``Q`` positive
semidefinite.  A feasible start comes from cheap candidates or, failing
those, phase 1 of the simplex method in :mod:`regctl.lp`.  Working-set
changes follow Bland's rule (lowest index first) so degenerate vertices,
such as Robinson's origin where four rows are active in R^4 with rank 3,
cannot make the method cycle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import nnls

from regctl.lp import LP_TOL, solve_lp

KKT_TOL = 1e-8
EIG_TOL = 1e-10
MAX_ITER = 200


class NonSymmetricError(ValueError):
    pass


class IndefiniteHessianError(ValueError):
    def __init__(self, min_eig: float, x=None):
        self.min_eig = min_eig
        self.x = None if x is None else np.asarray(x, dtype=float)
        where = "" if x is None else f" at x={self.x.tolist()}"
        super().__init__(f"Q is not positive semidefinite{where}: smallest eigenvalue {min_eig:.3e}")


@dataclass
class QpInstance:
    """Numeric QP data ``(Q, c, A, b)`` with feasibility ``A u >= b``."""

    Q: np.ndarray
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        m = self.Q.shape[0]
        if self.Q.shape != (m, m):
            raise ValueError(f"Q must be square, got shape {self.Q.shape}")
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        self.A = np.asarray(self.A, dtype=float).reshape(self.b.shape[0], m) if self.b.size else np.zeros((0, m))
        if self.c.shape[0] != m:
            raise ValueError(f"c has length {self.c.shape[0]}, expected {m}")
        scale = max(1.0, float(np.abs(self.Q).max(initial=0.0)))
        if np.abs(self.Q - self.Q.T).max(initial=0.0) > 1e-12 * scale:
            raise NonSymmetricError("Q is not symmetric")

    @property
    def m(self) -> int:
        return self.Q.shape[0]

    @property
    def p(self) -> int:
        return self.b.shape[0]


@dataclass
class KktSolution:
    u_star: np.ndarray | None
    lambda_star: np.ndarray | None
    active_set: tuple[int, ...]
    objective: float | None
    stationarity_residual: float
    complementarity_residual: float
    feasibility_violation: float
    status: str  # optimal | infeasible | unbounded | max_iterations
    iterations: int = 0
    objective_history: list[float] = field(default_factory=list)
    certificate: np.ndarray | None = None
    x: np.ndarray | None = None

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


def kkt_residuals(inst: QpInstance, u: np.ndarray, lam: np.ndarray) -> tuple[float, float, float]:
    """Scaled (stationarity, complementarity, feasibility) residuals.

    Each residual is divided by ``1 +`` the magnitude of the terms it
    balances, so that badly scaled rows (e.g. coefficients ~1e-18) do not
    swamp the check.
    """
    Qu = inst.Q @ u
    Atl = inst.A.T @ lam if inst.p else np.zeros(inst.m)
    stat = np.abs(Qu + inst.c - Atl).max(initial=0.0)
    stat /= 1.0 + max(np.abs(Qu).max(initial=0.0), np.abs(inst.c).max(initial=0.0), np.abs(Atl).max(initial=0.0))
    if not inst.p:
        return float(stat), 0.0, 0.0
    Au = inst.A @ u
    mag = 1.0 + np.abs(inst.b) + np.abs(inst.A) @ np.abs(u)
    slack = Au - inst.b
    feas = float(np.max(np.maximum(0.0, -slack) / mag))
    comp = float(np.max(np.abs(lam * slack) / (1.0 + np.abs(lam) * mag)))
    return float(stat), comp, feas


def _farkas_certificate(An: np.ndarray, bn: np.ndarray, lp_tol: float) -> np.ndarray | None:
    """``y >= 0, sum y = 1, An' y = 0`` maximizing ``bn' y`` (positive value proves infeasibility)."""
    p, m = An.shape
    A_ineq = np.eye(p)
    A_eq = np.vstack([An.T, np.ones((1, p))])
    b_eq = np.concatenate([np.zeros(m), [1.0]])
    res = solve_lp(A_eq, b_eq, A_ineq, np.zeros(p), bn, sense="max", lp_tol=lp_tol)
    if res.status == "optimal" and res.value > lp_tol:
        return res.x
    return None


def _initial_working_set(An: np.ndarray, bn: np.ndarray, rows: np.ndarray, u: np.ndarray, m: int) -> list[int]:
    """Rows tight at ``u``, kept greedily by lowest index while they stay linearly independent."""
    if not rows.size:
        return []
    tight = rows[np.abs(An[rows] @ u - bn[rows]) <= 1e-12 * (1.0 + np.abs(bn[rows]))]
    W: list[int] = []
    basis: list[np.ndarray] = []
    for i in tight:
        if len(W) == m:
            break
        # rows are unit length, so the projection residual measures independence directly
        r = An[i].copy()
        for q in basis:
            r -= (q @ r) * q
        norm = np.sqrt(r @ r)
        if norm > 1e-10:
            basis.append(r / norm)
            W.append(int(i))
    return W


def _null_space(W: np.ndarray, m: int) -> np.ndarray:
    if W.shape[0] == 0:
        return np.eye(m)
    _, s, vt = np.linalg.svd(W)
    rank = int(np.sum(s > 1e-12 * max(1.0, s[0])))
    return vt[rank:].T


def solve_qp(inst: QpInstance, kkt_tol: float = KKT_TOL, eig_tol: float = EIG_TOL,
             max_iter: int = MAX_ITER, lp_tol: float = LP_TOL) -> KktSolution:
    """Solve a convex QP by the primal active-set method."""
    Q, c, A, b = inst.Q, inst.c, inst.A, inst.b
    m, p = inst.m, inst.p
    eigs = np.linalg.eigvalsh(Q)
    qscale = max(1.0, float(np.abs(eigs).max(initial=0.0)))
    if eigs[0] < -eig_tol * qscale:
        raise IndefiniteHessianError(float(eigs[0]))

    def objective(u):
        return float(0.5 * u @ Q @ u + c @ u)

    def fail(status, cert=None, its=0, hist=None):
        return KktSolution(None, None, (), None, np.inf, np.inf, np.inf, status, its, hist or [], cert)

    # normalize rows; exactly-zero rows are constant constraints 0 >= b_i
    norms = np.linalg.norm(A, axis=1) if p else np.zeros(0)
    live = norms > np.finfo(float).tiny
    zero_rows = np.flatnonzero(~live)
    for i in zero_rows:
        if b[i] > kkt_tol:
            cert = np.zeros(p)
            cert[i] = 1.0
            return fail("infeasible", cert)
    safe = np.where(live, norms, 1.0)
    An = A / safe[:, None] if p else A
    bn = np.where(live, b / safe, 0.0) if p else b
    rows = np.flatnonzero(live)

    def feasible(u):
        if not rows.size:
            return True
        slack = An[rows] @ u - bn[rows]
        return bool(np.all(slack >= -1e-12 * (1.0 + np.abs(bn[rows]))))

    # feasible start
    start = None
    if eigs[0] > eig_tol * qscale:
        u0 = np.linalg.solve(Q, -c)
        if feasible(u0):
            start = u0
    if start is None and feasible(np.zeros(m)):
        start = np.zeros(m)
    if start is None and rows.size:
        cand = np.linalg.lstsq(An[rows], bn[rows], rcond=None)[0]
        if feasible(cand):
            start = cand
    if start is None:
        res = solve_lp(A_ineq=An[rows], b_ineq=bn[rows], objective=np.zeros(m), lp_tol=lp_tol)
        if res.status != "optimal":
            sub = _farkas_certificate(An[rows], bn[rows], lp_tol)
            cert = None
            if sub is not None:
                cert = np.zeros(p)
                cert[rows] = sub / safe[rows]
            return fail("infeasible", cert)
        start = res.x

    u = np.array(start, dtype=float)
    strict = eigs[0] > eig_tol * qscale
    W = _initial_working_set(An, bn, rows, u, m)
    hist = [objective(u)]
    status = "max_iterations"
    its = 0
    lamW = np.zeros(0)
    while its < max_iter:
        its += 1
        g = Q @ u + c
        gscale = 1.0 + np.abs(g).max(initial=0.0) + np.abs(c).max(initial=0.0)
        ray = False
        if strict:
            # Q positive definite: one KKT solve gives the step and multipliers
            k = len(W)
            K = np.zeros((m + k, m + k))
            K[:m, :m] = Q
            if k:
                K[:m, m:] = An[W].T
                K[m:, :m] = An[W]
            if k == m:
                step = np.zeros(m)
                lamW = np.linalg.solve(An[W].T, g)
            else:
                sol = np.linalg.solve(K, np.concatenate([-g, np.zeros(k)]))
                step = sol[:m]
                lamW = -sol[m:]
        else:
            Z = _null_space(An[W], m)
            if Z.shape[1] == 0:
                step = np.zeros(m)
            else:
                H = Z.T @ Q @ Z
                w, V = np.linalg.eigh(H)
                gv = V.T @ (Z.T @ g)
                flat = w <= eig_tol * qscale
                if np.any(flat & (np.abs(gv) > kkt_tol * gscale)):
                    ray = True
                    step = -Z @ (V[:, flat] @ gv[flat])
                else:
                    step = -Z @ (V[:, ~flat] @ (gv[~flat] / w[~flat]))
            if W:
                lamW = np.linalg.lstsq(An[W].T, g, rcond=None)[0]

        if not ray and np.sqrt(step @ step) <= 1e-11 * (1.0 + np.sqrt(u @ u) + np.sqrt(g @ g)):
            neg = [k for k in sorted(range(len(W)), key=lambda k: W[k]) if lamW[k] < -kkt_tol * gscale]
            if not W or not neg:
                status = "optimal"
                break
            drop = neg[0]
            W.pop(drop)
            lamW = np.delete(lamW, drop)
            continue

        alpha = np.inf if ray else 1.0
        blocking = None
        if W:
            free = np.ones(p, dtype=bool)
            free[W] = False
            cand = rows[free[rows]]
        else:
            cand = rows
        if cand.size:
            d = An[cand] @ step
            hit = d < -1e-12 * np.sqrt(step @ step)
            if hit.any():
                idx = cand[hit]
                ratios = np.maximum(0.0, (An[idx] @ u - bn[idx]) / -d[hit])
                # ties go to the lowest index (Bland), as argmin returns the first minimum
                k = int(np.argmin(ratios))
                if ratios[k] < alpha:
                    alpha, blocking = float(ratios[k]), int(idx[k])
        if ray and blocking is None:
            return fail("unbounded", its=its, hist=hist)
        u = u + alpha * step
        if blocking is not None:
            W.append(int(blocking))
            W.sort()
        hist.append(objective(u))

    if status != "optimal":
        return KktSolution(u, None, (), objective(u), np.inf, np.inf, np.inf, status, its, hist)

    lam = _multipliers(inst, An, bn, rows, zero_rows, u, W, lamW, safe)
    slack = An @ u - bn if p else np.zeros(0)
    act_scale = 1e-9 * (1.0 + np.abs(bn))
    active = tuple(int(i) for i in range(p) if abs(slack[i]) <= act_scale[i])
    stat, comp, feas = kkt_residuals(inst, u, lam)
    return KktSolution(u, lam, active, objective(u), stat, comp, feas, "optimal", its, hist)


def _multipliers(inst, An, bn, rows, zero_rows, u, W, lamW, safe) -> np.ndarray:
    """Multipliers on the full active family, least-squares with a sign fallback."""
    p = inst.p
    lam = np.zeros(p)
    if not p:
        return lam
    g = inst.Q @ u + inst.c
    slack = An @ u - bn
    act = [i for i in rows if abs(slack[i]) <= 1e-9 * (1.0 + abs(bn[i]))]
    candidates = []
    if W:
        ln = np.zeros(p)
        ln[W] = np.maximum(lamW, 0.0)
        candidates.append(ln)
    if act:
        M = An[act].T
        ls = np.linalg.lstsq(M, g, rcond=None)[0]
        if ls.min() >= -1e-10 * (1.0 + np.abs(ls).max()):
            ln = np.zeros(p)
            ln[act] = np.maximum(ls, 0.0)
            candidates.insert(0, ln)
        else:
            nn, _ = nnls(M, g)
            ln = np.zeros(p)
            ln[act] = nn
            candidates.append(ln)
    if not candidates:
        return lam
    resid = [np.abs(An.T @ ln - g).max() for ln in candidates]
    ok = [k for k, r in enumerate(resid) if r <= 1e-10 * (1.0 + np.abs(g).max())]
    best = candidates[ok[0] if ok else int(np.argmin(resid))]
    # undo the row normalization
    lam = np.where(safe > 0, best / safe, 0.0)
    lam[zero_rows] = 0.0
    return lam
