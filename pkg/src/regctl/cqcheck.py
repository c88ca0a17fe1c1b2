"""Constraint qualifications at a state, each decided with a numerical certificate.

Conditions refer to the program ``min 1/2 u'Q(x)u + c(x)'u  s.t.  A(x)u >= b(x)``
frozen at a state ``x`` and, where relevant, at its optimizer ``u*``:

* LICQ: the active rows of ``A(x)`` are linearly independent.
* MFCQ: some ``z`` has ``A_i(x) z > 0`` for every active ``i``.
* SLATER: some ``u`` has ``A(x) u > b(x)`` componentwise.
* SCS: no active constraint carries a zero multiplier.
* CR: every subfamily of active rows keeps its rank near ``x``.
* LCF_BOUNDED: sampled stand-in for local compact feasibility, via
  boundedness of ``u*`` on shrinking balls (a heuristic, labeled as such).

Verdicts are ``holds``, ``fails`` or ``inconclusive``; an inconclusive entry
records the tolerance it could not resolve.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from regctl.lp import LP_TOL, solve_lp
from regctl.model import ParametricQp
from regctl.qp import EIG_TOL, KktSolution
from regctl.regprobe import DEFAULT_RADII, DIVERGENCE_FACTOR, ControllerMap, boundedness_sweep, unit_ball_pattern
from regctl.solver import evaluate_controller

CONDITIONS = ("LICQ", "MFCQ", "SLATER", "SCS", "CR", "LCF_BOUNDED")
RANK_TOL = 1e-9
MARGIN_TOL = 1e-9
SLATER_TOL = 1e-9
SCS_TOL = 1e-9
CR_MAX_ROWS = 12


@dataclass
class CqEntry:
    verdict: str  # holds | fails | inconclusive
    certificate: dict = field(default_factory=dict)
    detail: str = ""


@dataclass
class CqReport:
    x: np.ndarray
    entries: dict[str, CqEntry] = field(default_factory=dict)
    solution: KktSolution | None = None

    def verdict(self, name: str) -> str:
        return self.entries[name].verdict

    def enforce_consistency(self) -> None:
        """Slater implies MFCQ for constraints affine in ``u``; never report the contrary."""
        sl, mf = self.entries.get("SLATER"), self.entries.get("MFCQ")
        if sl is not None and mf is not None and sl.verdict == "holds" and mf.verdict == "fails":
            mf.verdict = "inconclusive"
            mf.detail += (f"; contradicts SLATER=holds, so the margin t*={mf.certificate.get('t')} "
                          f"is treated as below the resolvable tolerance {MARGIN_TOL}")


def act_tol(b: np.ndarray) -> float:
    return 1e-7 * (float(np.linalg.norm(b)) + 1.0)


def active_rows(program: ParametricQp, x, sol: KktSolution) -> list[int]:
    inst = program.evaluate(x)
    if sol.u_star is None or not inst.p:
        return []
    slack = inst.A @ sol.u_star - inst.b
    return [int(i) for i in np.flatnonzero(np.abs(slack) <= act_tol(inst.b))]


def _require_optimal(sol: KktSolution, what: str) -> None:
    if sol.status != "optimal":
        raise ValueError(f"{what} needs an optimal solution, got status {sol.status!r}")


def _rank(M: np.ndarray, rank_tol: float) -> tuple[int, np.ndarray]:
    if M.shape[0] == 0:
        return 0, np.zeros(0)
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0.0:
        return 0, s
    return int(np.sum(s > rank_tol * s[0])), s


def check_licq(program: ParametricQp, x, sol: KktSolution, rank_tol: float = RANK_TOL) -> CqEntry:
    _require_optimal(sol, "LICQ")
    act = active_rows(program, x, sol)
    if not act:
        return CqEntry("holds", {"active": [], "singular_values": []}, "no active constraints")
    M = program.evaluate(x).A[act]
    U, s, _ = np.linalg.svd(M)
    k = len(act)
    smin = s[k - 1] if k <= len(s) else 0.0
    ratio = smin / s[0] if s[0] > 0 else 0.0
    cert = {"active": act, "singular_values": s.tolist(), "ratio": float(ratio)}
    rank = int(np.sum(s > rank_tol * s[0])) if s[0] > 0 else 0
    cert["rank"] = rank
    if rank_tol / 10.0 <= ratio <= rank_tol * 10.0:
        return CqEntry("inconclusive", cert, f"sigma_min/sigma_max = {ratio:.3e} within 10x of rank_tol = {rank_tol:g}")
    if rank == k:
        return CqEntry("holds", cert, f"{k} active rows, rank {rank}")
    # coefficients of a vanishing combination of the active rows
    cert["dependence"] = U[:, -1].tolist()
    return CqEntry("fails", cert, f"{k} active rows, rank {rank}")


def check_mfcq(program: ParametricQp, x, sol: KktSolution, margin_tol: float = MARGIN_TOL,
               lp_tol: float = LP_TOL) -> CqEntry:
    _require_optimal(sol, "MFCQ")
    act = active_rows(program, x, sol)
    m = program.m
    if not act:
        return CqEntry("holds", {"z": [0.0] * m, "t": float("inf"), "active": []}, "no active constraints")
    M = program.evaluate(x).A[act]
    # variables (z, t): maximize t with M z - t >= 0, -1 <= z_j <= 1
    rows = [np.hstack([M, -np.ones((len(act), 1))]),
            np.hstack([np.eye(m), np.zeros((m, 1))]),
            np.hstack([-np.eye(m), np.zeros((m, 1))])]
    rhs = np.concatenate([np.zeros(len(act)), -np.ones(2 * m)])
    obj = np.zeros(m + 1)
    obj[-1] = 1.0
    res = solve_lp(A_ineq=np.vstack(rows), b_ineq=rhs, objective=obj, sense="max", lp_tol=lp_tol)
    if res.status != "optimal":
        return CqEntry("inconclusive", {"lp_status": res.status, "lp_tol": lp_tol}, "MFCQ LP did not solve")
    z, t = res.x[:m], float(res.x[-1])
    cert = {"z": z.tolist(), "t": t, "active": act}
    if t > margin_tol:
        return CqEntry("holds", cert, f"direction z gives min_i A_i z = {t:.6g} > {margin_tol:g}")
    return CqEntry("fails", cert, f"best margin t* = {t:.6g} <= {margin_tol:g}")


def _normalized(A: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(A, axis=1)
    live = norms > 0.0
    scale = np.where(live, norms, 1.0)
    return A / scale[:, None], b / scale


def check_slater(program: ParametricQp, x, slater_tol: float = SLATER_TOL, lp_tol: float = LP_TOL) -> CqEntry:
    """Strict feasibility by a margin LP, cross-checked by a dual cone test."""
    inst = program.evaluate(x)
    m, p = inst.m, inst.p
    if p == 0:
        return CqEntry("holds", {"u_hat": [0.0] * m, "t": float("-inf")}, "no constraints")
    An, bn = _normalized(inst.A, inst.b)
    # primary: minimize t s.t. An u + t >= bn, t >= -1 (the floor keeps the LP bounded)
    Ain = np.vstack([np.hstack([An, np.ones((p, 1))]), np.hstack([np.zeros((1, m)), [[1.0]]])])
    bin_ = np.concatenate([bn, [-1.0]])
    obj = np.zeros(m + 1)
    obj[-1] = 1.0
    res = solve_lp(A_ineq=Ain, b_ineq=bin_, objective=obj, lp_tol=lp_tol)
    if res.status != "optimal":
        return CqEntry("inconclusive", {"lp_status": res.status, "lp_tol": lp_tol}, "margin LP did not solve")
    u_hat, t = res.x[:m], float(res.x[-1])
    primary = "holds" if t < -slater_tol else "fails"
    cert = {"u_hat": u_hat.tolist(), "t": t}

    if t > slater_tol:
        # infeasible program: the cone test characterizes Slater only for feasible programs
        cert["cone_test"] = "not applicable (program infeasible)"
        return CqEntry("fails", cert, f"program infeasible at x: least violation t* = {t:.6g}")

    # cross-check: mu >= 0, sum mu = 1, An' mu = 0, bn' mu = 0 is feasible iff Slater fails
    A_eq = np.vstack([An.T, bn[None, :], np.ones((1, p))])
    b_eq = np.concatenate([np.zeros(m + 1), [1.0]])
    cone = solve_lp(A_eq=A_eq, b_eq=b_eq, A_ineq=np.eye(p), b_ineq=np.zeros(p), objective=np.zeros(p), lp_tol=lp_tol)
    cone_verdict = "fails" if cone.status == "optimal" else "holds"
    if cone.status == "optimal":
        cert["mu"] = cone.x.tolist()
    if cone_verdict != primary:
        return CqEntry("inconclusive", cert,
                       f"margin LP says {primary} (t* = {t:.3e}), cone test says {cone_verdict}; "
                       f"tolerance {slater_tol:g}")
    if primary == "holds":
        return CqEntry("holds", cert, f"u_hat strictly feasible with normalized margin {-t:.6g}")
    return CqEntry("fails", cert, f"no strictly feasible point (t* = {t:.6g}); cone multiplier mu found")


def check_scs(program: ParametricQp, x, sol: KktSolution, scs_tol: float = SCS_TOL) -> CqEntry:
    _require_optimal(sol, "SCS")
    act = active_rows(program, x, sol)
    lam = sol.lambda_star
    cert = {"active": act, "multipliers": [float(lam[i]) for i in act]}
    if not act:
        return CqEntry("holds", cert, "no active constraints")
    weak = [i for i in act if lam[i] <= scs_tol]
    if weak:
        cert["witness"] = weak
        return CqEntry("fails", cert, f"active constraints with zero multiplier: {[i + 1 for i in weak]}")
    near = [i for i in act if lam[i] <= 10.0 * scs_tol]
    if near:
        return CqEntry("inconclusive", cert, f"multipliers of {[i + 1 for i in near]} within 10x of scs_tol = {scs_tol:g}")
    return CqEntry("holds", cert, f"smallest active multiplier {min(lam[i] for i in act):.6g}")


def check_cr(program: ParametricQp, x, sol: KktSolution, num_samples: int = 64, radius: float = 1e-3,
             rank_tol: float = RANK_TOL, seed: int = 0) -> CqEntry:
    """Rank of every subfamily of active rows at ``x`` and at sampled nearby states."""
    _require_optimal(sol, "CR")
    if program.p > CR_MAX_ROWS:
        raise ValueError(f"CR check enumerates subsets; p = {program.p} exceeds {CR_MAX_ROWS}")
    act = active_rows(program, x, sol)
    x = np.asarray(x, dtype=float).reshape(-1)
    if not act:
        return CqEntry("holds", {"active": [], "samples": num_samples + 1}, "no active constraints")
    points = np.vstack([x, x + radius * unit_ball_pattern(program.n, num_samples, seed)])
    mats = [program.evaluate(y).A[act] for y in points]
    varying = []
    witness = None
    for size in range(1, len(act) + 1):
        for sub in combinations(range(len(act)), size):
            ranks = [_rank(M[list(sub)], rank_tol)[0] for M in mats]
            if len(set(ranks)) > 1:
                subset = [act[k] for k in sub]
                varying.append(subset)
                if witness is None:
                    lo, hi = int(np.argmin(ranks)), int(np.argmax(ranks))
                    witness = {"subset": subset, "points": [points[lo].tolist(), points[hi].tolist()],
                               "ranks": [ranks[lo], ranks[hi]]}
    cert = {"active": act, "samples": len(points), "radius": radius, "seed": seed}
    if witness is None:
        return CqEntry("holds", cert, f"all {2 ** len(act) - 1} subfamilies keep constant rank on {len(points)} points")
    cert.update(witness=witness, varying_subsets=varying)
    return CqEntry("fails", cert, f"rank of rows {[i + 1 for i in witness['subset']]} varies: "
                                  f"{witness['ranks'][0]} vs {witness['ranks'][1]}")


def check_lcf_bounded(program: ParametricQp, x, radii=DEFAULT_RADII, grid_per_radius: int = 64,
                      divergence_factor: float = DIVERGENCE_FACTOR, seed: int = 0) -> CqEntry:
    """Heuristic: sup of ``|u*|`` on shrinking balls stabilizes (holds) or diverges (fails)."""
    est = boundedness_sweep(ControllerMap.from_program(program), x, radii=radii,
                            samples_per_radius=grid_per_radius, divergence_factor=divergence_factor, seed=seed)
    verdict = {"consistent": "holds", "violated": "fails"}.get(est.verdict, "inconclusive")
    cert = {"radii": list(radii), "sup_norm": est.params["sup_norm"], "growth": est.params["growth"],
            "skipped": est.skipped, "seed": seed}
    return CqEntry(verdict, cert, f"heuristic sweep: sup growth {est.params['growth']:.3e} vs "
                                  f"divergence factor {divergence_factor:g}; {est.skipped} infeasible samples skipped")


def analyze(program: ParametricQp, x, include_lcf: bool = True, seed: int = 0, **solver_opts) -> CqReport:
    """Solve at ``x`` and run every check; raises ``ValueError`` when the QP has no optimizer there."""
    x = np.asarray(x, dtype=float).reshape(-1)
    sol = evaluate_controller(program, x, **solver_opts)
    report = CqReport(x, solution=sol)
    report.entries["SLATER"] = check_slater(program, x)
    if sol.status != "optimal":
        raise ValueError(f"no optimizer at x={x.tolist()}: solver status {sol.status}")
    report.entries["LICQ"] = check_licq(program, x, sol)
    report.entries["MFCQ"] = check_mfcq(program, x, sol)
    report.entries["SCS"] = check_scs(program, x, sol)
    if program.p <= CR_MAX_ROWS:
        report.entries["CR"] = check_cr(program, x, sol, seed=seed)
    else:
        report.entries["CR"] = CqEntry("inconclusive", {"p": program.p}, f"p > {CR_MAX_ROWS}: subset enumeration skipped")
    if include_lcf:
        report.entries["LCF_BOUNDED"] = check_lcf_bounded(program, x, seed=seed)
    report.entries = {k: report.entries[k] for k in CONDITIONS if k in report.entries}
    report.enforce_consistency()
    return report


def implications(report: CqReport, program: ParametricQp) -> list[str]:
    """Regularity consequences whose hypotheses the report verified."""
    out = []
    v = {k: e.verdict for k, e in report.entries.items()}
    strongly_convex = bool(np.linalg.eigvalsh(program.evaluate(report.x).Q)[0] > EIG_TOL)
    if v.get("SLATER") == "holds" and strongly_convex:
        out.append("Slater + smooth data + strong convexity => u* point-Lipschitz, Hoelder and "
                   "directionally differentiable at x")
    if v.get("LICQ") == "holds" and strongly_convex:
        out.append("LICQ + strong convexity => u* locally Lipschitz near x")
        if v.get("SCS") == "holds":
            out.append("LICQ + SCS + strong convexity => u* continuously differentiable near x")
    if v.get("MFCQ") == "holds" and strongly_convex:
        out.append("MFCQ + strong convexity => u* continuous at x")
    if program.m == 1 and v.get("SLATER") == "holds":
        out.append("single input with Slater => u* locally Lipschitz near x")
    if v.get("LCF_BOUNDED") == "fails":
        out.append("sampled sup |u*| diverges => u* not locally bounded at x (heuristic)")
    return out
