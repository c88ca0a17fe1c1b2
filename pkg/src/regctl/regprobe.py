"""Sampling probes for the regularity of a controller map ``x -> u*(x)``.

Every probe draws a deterministic, seeded low-discrepancy pattern in the unit
ball and rescales it to each radius of a shrinking ladder, so estimates are
reproducible and comparable across radii.  Verdicts say whether the samples
are *consistent* with a regularity hypothesis or *violate* it; finite samples
never prove regularity.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import linregress, qmc

from regctl.model import ParametricQp
from regctl.qp import KKT_TOL
from regctl.solver import evaluate_controller

DEFAULT_RADII = tuple(10.0 ** -k for k in range(1, 6))
DEFAULT_STEPS = tuple(10.0 ** -k for k in range(1, 7))
DEFAULT_S_VALUES = (0.1, 0.05, 0.01, 0.005)
GROWTH_CAP = 1e2
DIVERGENCE_FACTOR = 1e3


class ControllerInfeasible(RuntimeError):
    """The controller is undefined at a state (e.g. the QP is infeasible there)."""

    def __init__(self, x, status: str = "infeasible"):
        self.x = np.asarray(x, dtype=float)
        self.status = status
        super().__init__(f"controller undefined at x={self.x.tolist()} ({status})")


@dataclass(frozen=True)
class ControllerMap:
    """Deterministic map from a state vector to an input vector."""

    evaluator: Callable[[np.ndarray], np.ndarray]
    state_dim: int
    input_dim: int
    name: str = "map"

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape[0] != self.state_dim:
            raise ValueError(f"{self.name}: state has length {x.shape[0]}, expected {self.state_dim}")
        return np.asarray(self.evaluator(x), dtype=float).reshape(-1)

    def component(self, index: int) -> ControllerMap:
        """Scalar map picking output ``index`` (0-based)."""
        if not 0 <= index < self.input_dim:
            raise IndexError(f"{self.name} has {self.input_dim} outputs, no index {index}")
        parent = self
        return ControllerMap(lambda x: parent(x)[index: index + 1], self.state_dim, 1,
                             f"{self.name}[{index + 1}]")

    @classmethod
    def from_program(cls, program: ParametricQp, **solver_opts) -> ControllerMap:
        def evaluate(x):
            sol = evaluate_controller(program, x, **solver_opts)
            if sol.status != "optimal":
                raise ControllerInfeasible(x, sol.status)
            return sol.u_star

        return cls(evaluate, program.n, program.m, program.name)

    @classmethod
    def from_function(cls, fn: Callable, state_dim: int, input_dim: int = 1, name: str = "closed_form"):
        """Wrap ``fn(*x)`` returning a scalar or a sequence."""
        return cls(lambda x: np.atleast_1d(fn(*x)), state_dim, input_dim, name)

    @classmethod
    def linear(cls, M, name: str = "linear") -> ControllerMap:
        M = np.atleast_2d(np.asarray(M, dtype=float))
        return cls(lambda x: M @ x, M.shape[1], M.shape[0], name)


@dataclass
class RegularityEstimate:
    kind: str  # local_lipschitz | point_lipschitz | holder | directional | jump | boundedness
    hypothesis: str
    verdict: str  # consistent | violated | inconclusive
    params: dict = field(default_factory=dict)
    records: list[tuple] = field(default_factory=list)
    record_columns: tuple[str, ...] = ("radius", "distance", "value", "component")
    seed: int | None = None
    skipped: int = 0

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.record_columns)
        for row in self.records:
            writer.writerow([_fmt(v) for v in row])
        return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def unit_ball_pattern(dim: int, count: int, seed: int = 0) -> np.ndarray:
    """``count`` scrambled-Halton points in the closed unit ball (rows)."""
    sampler = qmc.Halton(d=dim, scramble=True, seed=seed)
    out = []
    have = 0
    while have < count:
        pts = 2.0 * sampler.random(max(64, 2 * count)) - 1.0
        pts = pts[np.linalg.norm(pts, axis=1) <= 1.0]
        pts = pts[np.linalg.norm(pts, axis=1) > 0.0]
        out.append(pts)
        have += len(pts)
    return np.concatenate(out)[:count]


def _ladder(radii: Sequence[float]) -> np.ndarray:
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or radii.size < 2 or np.any(radii <= 0) or np.any(np.diff(radii) >= 0):
        raise ValueError("radii must be a strictly decreasing list of at least two positive numbers")
    return radii


def _safe_eval(fmap: ControllerMap, y) -> np.ndarray | None:
    try:
        return fmap(y)
    except ControllerInfeasible:
        return None


def lipschitz_quotient(fmap: ControllerMap, pairs) -> np.ndarray:
    """``||u(y) - u(z)|| / ||y - z||`` for each pair."""
    out = []
    for y, z in pairs:
        y = np.atleast_1d(np.asarray(y, dtype=float))
        z = np.atleast_1d(np.asarray(z, dtype=float))
        dist = np.linalg.norm(y - z)
        if dist == 0.0:
            raise ValueError(f"coincident pair {y.tolist()}")
        out.append(np.linalg.norm(fmap(y) - fmap(z)) / dist)
    return np.array(out)


# two-dimensional pair families (p(s), q(s)) around a center c
PAIR_FAMILIES: dict[str, Callable[[float], tuple[tuple[float, float], tuple[float, float]]]] = {
    # same abscissa, one point on the parabola x2 = x1^2/2 and one on the axis
    "parabola": lambda s: ((s, s * s / 2.0), (s, 0.0)),
    # a point on the line x2 = x1/2 against the center itself
    "half-line": lambda s: ((s, s / 2.0), (0.0, 0.0)),
}


def pair_family_estimate(fmap: ControllerMap, center, family: str,
                         s_values: Sequence[float] = DEFAULT_S_VALUES) -> RegularityEstimate:
    """Quotients along a named pair family as ``s`` shrinks.

    The local-Lipschitz hypothesis is refuted when the quotients grow
    monotonically like ``s^-k`` with fitted ``k >= 1/2``.
    """
    if fmap.state_dim != 2:
        raise ValueError("pair families are defined for two-dimensional states")
    s_values = _ladder(s_values)
    c = np.atleast_1d(np.asarray(center, dtype=float))
    pairs = [tuple(c + np.array(pt) for pt in PAIR_FAMILIES[family](s)) for s in s_values]
    q = lipschitz_quotient(fmap, pairs)
    dists = [float(np.linalg.norm(y - z)) for y, z in pairs]
    records = [(float(s), d, float(qi), float(s * qi)) for s, d, qi in zip(s_values, dists, q)]
    slope = np.nan
    if np.all(q > 0):
        slope = float(linregress(np.log(s_values), np.log(q)).slope)
    growing = bool(np.all(np.diff(q) > 0))
    verdict = "violated" if growing and slope <= -0.5 else "consistent"
    return RegularityEstimate(
        "local_lipschitz", "locally Lipschitz near the center", verdict,
        {"center": c.tolist(), "family": family, "s": s_values.tolist(), "quotient": q.tolist(),
         "loglog_slope": slope},
        records, record_columns=("s", "distance", "quotient", "s_times_quotient"))


def _ball_sweep(fmap, x0, radii, samples_per_radius, seed, value):
    """Evaluate ``value(y, u(y))`` on the scaled pattern for each radius."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    pattern = unit_ball_pattern(x0.shape[0], samples_per_radius, seed)
    records, sups, skipped = [], [], 0
    for r in radii:
        best = None
        for offset in pattern:
            y = x0 + r * offset
            u = _safe_eval(fmap, y)
            if u is None:
                skipped += 1
                continue
            dist = float(np.linalg.norm(y - x0))
            val = float(value(y, u, dist))
            records.append((float(r), dist, val, "norm"))
            best = val if best is None else max(best, val)
        sups.append(np.nan if best is None else best)
    return np.array(sups), records, skipped


def point_lipschitz_estimate(fmap: ControllerMap, x0, radii: Sequence[float] = DEFAULT_RADII,
                             samples_per_radius: int = 256, seed: int = 0,
                             growth_cap: float = GROWTH_CAP) -> RegularityEstimate:
    """Sup of ``||u(y) - u(x0)|| / ||y - x0||`` over shrinking balls around ``x0``."""
    radii = _ladder(radii)
    u0 = fmap(x0)
    sups, records, skipped = _ball_sweep(
        fmap, x0, radii, samples_per_radius, seed,
        lambda y, u, d: np.linalg.norm(u - u0) / d)
    verdict, growth = _growth_verdict(sups, growth_cap)
    return RegularityEstimate(
        "point_lipschitz", "point-Lipschitz at x0", verdict,
        {"x0": np.atleast_1d(x0).tolist(), "radii": radii.tolist(), "sup_quotient": sups.tolist(),
         "L": float(np.nanmax(sups)) if np.any(np.isfinite(sups)) else np.nan, "growth": growth,
         "growth_cap": growth_cap},
        records, seed=seed, skipped=skipped)


def _growth_verdict(sups: np.ndarray, cap: float, slack: float = 0.05) -> tuple[str, float]:
    """``violated`` when sups grow (near-)monotonically by more than ``cap``."""
    vals = sups[np.isfinite(sups)]
    if vals.size < 2:
        return "inconclusive", np.nan
    if vals[0] == 0.0:
        growth = 0.0 if vals[-1] == 0.0 else np.inf
    else:
        growth = float(vals[-1] / vals[0])
    monotone = bool(np.all(vals[1:] >= (1.0 - slack) * vals[:-1]))
    return ("violated" if growth > cap and monotone else "consistent"), growth


def holder_fit(fmap: ControllerMap, x0, radii: Sequence[float] = DEFAULT_RADII,
               samples_per_radius: int = 256, seed: int = 0) -> RegularityEstimate:
    """Fit ``sup_{|y-x0|<=r} ||u(y)-u(x0)|| ~ C r^alpha`` on a log-log scale."""
    radii = _ladder(radii)
    u0 = fmap(x0)
    sups, records, skipped = _ball_sweep(
        fmap, x0, radii, samples_per_radius, seed,
        lambda y, u, d: np.linalg.norm(u - u0))
    keep = np.isfinite(sups) & (sups > 0.0)
    params = {"x0": np.atleast_1d(x0).tolist(), "radii": radii.tolist(), "sup_increment": sups.tolist()}
    if np.count_nonzero(keep) < 2:
        if np.all(sups[np.isfinite(sups)] == 0.0):
            params.update(alpha=np.nan, C=0.0, residual=0.0, stderr=0.0)
            return RegularityEstimate("holder", "Hoelder at x0 with alpha in (0, 1]", "consistent",
                                      params, records, seed=seed, skipped=skipped)
        raise ValueError("degenerate Hoelder fit: fewer than two usable radii")
    lr, ls = np.log(radii[keep]), np.log(sups[keep])
    if np.ptp(ls) == 0.0:
        raise ValueError("degenerate Hoelder fit: all sup distances equal")
    fit = linregress(lr, ls)
    resid = ls - (fit.intercept + fit.slope * lr)
    alpha, se = float(fit.slope), float(fit.stderr) if np.isfinite(fit.stderr) else 0.0
    band = max(2.0 * se, 0.05)
    verdict = "consistent" if alpha + band > 0.0 and alpha - band <= 1.0 else "violated"
    params.update(alpha=alpha, C=float(np.exp(fit.intercept)), residual=float(np.sqrt(np.mean(resid ** 2))),
                  stderr=se)
    return RegularityEstimate("holder", "Hoelder at x0 with alpha in (0, 1]", verdict, params, records,
                              seed=seed, skipped=skipped)


def directional_derivative(fmap: ControllerMap, x0, v, steps: Sequence[float] = DEFAULT_STEPS,
                           tol: float = 1e-8) -> RegularityEstimate:
    """One-sided difference quotients ``(u(x0 + h v) - u(x0)) / h`` for shrinking ``h``."""
    steps = _ladder(steps)
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if np.linalg.norm(v) == 0.0:
        raise ValueError("direction must be nonzero")
    u0 = fmap(x0)
    quotients, used, records, skipped = [], [], [], 0
    for h in steps:
        u = _safe_eval(fmap, x0 + h * v)
        if u is None:
            skipped += 1
            continue
        q = (u - u0) / h
        quotients.append(q)
        used.append(h)
        records.extend((float(h), float(h * np.linalg.norm(v)), float(qi), k + 1) for k, qi in enumerate(q))
    if len(quotients) < 2:
        return RegularityEstimate("directional", "directionally differentiable at x0 along v",
                                  "inconclusive", {"steps": used}, records, skipped=skipped,
                                  record_columns=("step", "distance", "quotient", "component"))
    Q = np.array(quotients)
    diffs = np.linalg.norm(np.diff(Q, axis=0), axis=1)
    limit = Q[-1]
    settled = diffs[-1] <= tol * (1.0 + np.linalg.norm(limit))
    shrinking = bool(np.all(diffs[1:] <= 1.1 * diffs[:-1] + tol))
    verdict = "consistent" if settled or shrinking else "violated"
    return RegularityEstimate(
        "directional", "directionally differentiable at x0 along v", verdict,
        {"x0": x0.tolist(), "v": v.tolist(), "steps": used, "limit": limit.tolist(),
         "successive_differences": diffs.tolist()},
        records, skipped=skipped, record_columns=("step", "distance", "quotient", "component"))


def jump_scan(fmap: ControllerMap, segment, num_points: int = 1001, jump_tol: float = 0.1) -> RegularityEstimate:
    """Scan ``u`` along a segment and locate jumps, with one bisection round per flagged gap."""
    a, b = (np.atleast_1d(np.asarray(e, dtype=float)) for e in segment)
    if np.array_equal(a, b):
        raise ValueError("segment endpoints coincide")
    if num_points < 2:
        raise ValueError("need at least two points")
    s = np.linspace(0.0, 1.0, num_points)
    pts = a[None, :] + s[:, None] * (b - a)[None, :]
    vals = [_safe_eval(fmap, p) for p in pts]
    skipped = sum(v is None for v in vals)
    records = [(float(si), *map(float, p), float(np.linalg.norm(v)) if v is not None else np.nan)
               for si, p, v in zip(s, pts, vals)]
    jumps = []
    for k in range(num_points - 1):
        ul, ur = vals[k], vals[k + 1]
        if ul is None or ur is None:
            continue
        gap = np.linalg.norm(ur - ul)
        scale = max(np.linalg.norm(ul), np.linalg.norm(ur))
        thresh = jump_tol * (1.0 + scale)
        if gap <= thresh:
            continue
        sm = 0.5 * (s[k] + s[k + 1])
        um = _safe_eval(fmap, a + sm * (b - a))
        if um is None:
            continue
        g_left, g_right = np.linalg.norm(um - ul), np.linalg.norm(ur - um)
        if max(g_left, g_right) <= thresh:
            continue
        loc = 0.5 * (s[k] + sm) if g_left >= g_right else 0.5 * (sm + s[k + 1])
        jumps.append({"s": float(loc), "point": (a + loc * (b - a)).tolist(), "magnitude": float(gap)})
    cols = ("s",) + tuple(f"x{i + 1}" for i in range(a.shape[0])) + ("norm_u",)
    return RegularityEstimate("jump", "continuous along the segment", "violated" if jumps else "consistent",
                              {"segment": [a.tolist(), b.tolist()], "jumps": jumps, "jump_tol": jump_tol},
                              records, record_columns=cols, skipped=skipped)


def boundedness_sweep(fmap: ControllerMap, x0, radii: Sequence[float] = DEFAULT_RADII,
                      samples_per_radius: int = 256, divergence_factor: float = DIVERGENCE_FACTOR,
                      seed: int = 0) -> RegularityEstimate:
    """Sup of ``||u(y)||`` over shrinking balls; growth beyond ``divergence_factor`` refutes local boundedness."""
    radii = _ladder(radii)
    sups, records, skipped = _ball_sweep(fmap, x0, radii, samples_per_radius, seed,
                                         lambda y, u, d: np.linalg.norm(u))
    center = _safe_eval(fmap, x0)
    vals = sups[np.isfinite(sups)]
    if vals.size < 2:
        verdict, growth = "inconclusive", np.nan
    elif vals.max() == 0.0:
        verdict, growth = "consistent", 1.0
    else:
        base = max(vals[0], np.linalg.norm(center) if center is not None else 0.0)
        growth = float(vals[-1] / base) if base > 0 else np.inf
        verdict = "violated" if growth > divergence_factor else "consistent"
    keep = np.isfinite(sups) & (sups > 0.0)
    slope = float(linregress(np.log(radii[keep]), np.log(sups[keep])).slope) if np.count_nonzero(keep) >= 2 else np.nan
    return RegularityEstimate(
        "boundedness", "locally bounded at x0", verdict,
        {"x0": np.atleast_1d(x0).tolist(), "radii": radii.tolist(), "sup_norm": sups.tolist(),
         "growth": growth, "loglog_slope": slope, "divergence_factor": divergence_factor},
        records, seed=seed, skipped=skipped)


__all__ = [
    "ControllerInfeasible",
    "ControllerMap",
    "RegularityEstimate",
    "boundedness_sweep",
    "directional_derivative",
    "holder_fit",
    "jump_scan",
    "lipschitz_quotient",
    "point_lipschitz_estimate",
    "unit_ball_pattern",
    "KKT_TOL",
]
