"""Pointwise solution of parametric programs.

:func:`evaluate_controller` freezes a :class:`~regctl.model.ParametricQp` at a
state and hands the numeric instance to the active-set solver.
:func:`projected_gradient_qp` is an independent first-order solver used as an
oracle in tests.
"""

from __future__ import annotations

import numpy as np

from regctl.lp import LP_TOL, LpResult, solve_lp
from regctl.model import ParametricQp
from regctl.qp import (
    EIG_TOL,
    KKT_TOL,
    MAX_ITER,
    IndefiniteHessianError,
    KktSolution,
    QpInstance,
    kkt_residuals,
    solve_qp,
)

__all__ = [
    "IndefiniteHessianError",
    "KktSolution",
    "LpResult",
    "QpInstance",
    "evaluate_controller",
    "kkt_residuals",
    "projected_gradient_qp",
    "solve_lp",
    "solve_qp",
]


def evaluate_controller(program: ParametricQp, x, kkt_tol: float = KKT_TOL, eig_tol: float = EIG_TOL,
                        max_iter: int = MAX_ITER, lp_tol: float = LP_TOL) -> KktSolution:
    """Solve ``program`` at state ``x``; the returned solution carries ``x``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != program.n:
        raise ValueError(f"state has length {x.shape[0]}, program expects n={program.n}")
    inst = program.evaluate(x)
    try:
        sol = solve_qp(inst, kkt_tol=kkt_tol, eig_tol=eig_tol, max_iter=max_iter, lp_tol=lp_tol)
    except IndefiniteHessianError as exc:
        raise IndefiniteHessianError(exc.min_eig, x) from None
    sol.x = x
    return sol


def projected_gradient_qp(inst: QpInstance, tol: float = 1e-13, max_iter: int = 200_000) -> np.ndarray:
    """Accelerated projected gradient ascent on the dual of a strongly convex QP.

    The dual feasible set is the nonnegative orthant, so the projection is a
    clip.  Returns the primal point ``Q^{-1}(A' lam - c)``.
    """
    Q, c, A, b = inst.Q, inst.c, inst.A, inst.b
    Qinv = np.linalg.inv(Q)
    if not inst.p:
        return -Qinv @ c
    norms = np.linalg.norm(A, axis=1)
    norms[norms == 0.0] = 1.0
    A = A / norms[:, None]
    b = b / norms
    G = A @ Qinv @ A.T
    q = b + A @ Qinv @ c
    L = max(np.linalg.eigvalsh(G)[-1], 1e-300)
    lam = np.zeros(inst.p)
    y = lam.copy()
    t = 1.0

    def dual(v):
        return v @ q - 0.5 * v @ G @ v

    for _ in range(max_iter):
        lam_new = np.maximum(0.0, y + (q - G @ y) / L)
        if dual(lam_new) < dual(lam):
            # restart from a plain projected step
            t = 1.0
            lam_new = np.maximum(0.0, lam + (q - G @ lam) / L)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        y = lam_new + ((t - 1.0) / t_new) * (lam_new - lam)
        lam, t = lam_new, t_new
        # natural residual of the dual optimality conditions
        resid = np.abs(lam - np.maximum(0.0, lam + q - G @ lam)).max()
        if resid <= tol * (1.0 + np.abs(q).max()):
            break
    return Qinv @ (A.T @ lam - c)
