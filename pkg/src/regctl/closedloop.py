"""Closed-loop systems driven by optimization-based controllers.

Builders turn barrier, Lyapunov and gradient-flow designs into
:class:`~regctl.model.ParametricQp` instances.  :func:`integrate` runs a
deterministic fixed-step RK4 on ``xdot = F(x, u*(x))`` with event logging,
:func:`residual_check` tests whether an analytic curve solves the closed loop,
and three monitors sample the invariance conditions for a safe set
``C = {h >= 0}``: Nagumo sub-tangentiality, the minimal barrier inequality
``grad h . F + alpha h >= 0`` on a band around ``C``, and its Filippov
version, which takes the worst field value over a small ball.

Class-K functions are linear, ``alpha(r) = gain * r``.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import qmc

from regctl.model import ControlAffineSystem, ParametricQp
from regctl.poly import DimensionError, PolyBatch, PolyExpr, gradient, poly_partial
from regctl.regprobe import ControllerInfeasible, ControllerMap, unit_ball_pattern

MONITOR_TOL = 1e-7
RESIDUAL_TOL = 1e-6


# builders


def _as_polys(values, n: int, length: int, label: str) -> list[PolyExpr]:
    if isinstance(values, (PolyExpr, int, float)):
        values = [values]
    out = [v if isinstance(v, PolyExpr) else PolyExpr.constant(n, float(v)) for v in values]
    if len(out) != length:
        raise DimensionError(f"{label} must have {length} entries, got {len(out)}")
    if any(p.num_vars != n for p in out):
        raise DimensionError(f"{label} entries must be polynomials in {n} variables")
    return out


def _identity(n: int, m: int) -> list[list[PolyExpr]]:
    one, zero = PolyExpr.constant(n, 1.0), PolyExpr.zero(n)
    return [[one if i == j else zero for j in range(m)] for i in range(m)]


def _cbf_row(dynamics: ControlAffineSystem, h: PolyExpr, alpha: float) -> tuple[list[PolyExpr], PolyExpr]:
    if h.num_vars != dynamics.n:
        raise DimensionError(f"barrier has {h.num_vars} variables, dynamics has n={dynamics.n}")
    lf0, lfi = dynamics.lie_rows(h)
    return lfi, -alpha * h - lf0


def build_safety_filter(dynamics: ControlAffineSystem, h: PolyExpr, alpha: float,
                        nominal, name: str = "safety_filter") -> ParametricQp:
    """Closest input to ``nominal`` satisfying ``L_F0 h + L_G h u >= -alpha h``."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    n, m = dynamics.n, dynamics.m
    k = _as_polys(nominal, n, m, "nominal controller")
    row, rhs = _cbf_row(dynamics, h, alpha)
    return ParametricQp(n, m, _identity(n, m), [-ki for ki in k], [row], [rhs], name=name)


def build_clf_cbf(dynamics: ControlAffineSystem, h: PolyExpr, V: PolyExpr, W: PolyExpr, alpha: float,
                  nominal, name: str = "clf_cbf") -> ParametricQp:
    """Safety filter plus the Lyapunov decrease row ``-L_G V u >= W + L_F0 V``."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    n, m = dynamics.n, dynamics.m
    k = _as_polys(nominal, n, m, "nominal controller")
    for label, p in (("V", V), ("W", W)):
        if p.num_vars != n:
            raise DimensionError(f"{label} has {p.num_vars} variables, dynamics has n={n}")
    cbf_row, cbf_rhs = _cbf_row(dynamics, h, alpha)
    lf0v, lfv = dynamics.lie_rows(V)
    return ParametricQp(n, m, _identity(n, m), [-ki for ki in k],
                        [cbf_row, [-r for r in lfv]], [cbf_rhs, W + lf0v], name=name)


def build_sgf(objective: PolyExpr, constraints: Sequence[PolyExpr], alpha: float,
              name: str = "sgf") -> ParametricQp:
    """Safe gradient flow for ``min f(x) s.t. g_i(x) <= 0`` with dynamics ``xdot = xi``.

    The program is ``min 1/2|xi|^2 + grad f . xi`` subject to
    ``-grad g_i . xi >= alpha g_i``.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    n = objective.num_vars
    for g in constraints:
        if g.num_vars != n:
            raise DimensionError(f"constraint has {g.num_vars} variables, objective has {n}")
    A = [[-poly_partial(g, j) for j in range(n)] for g in constraints]
    b = [alpha * g for g in constraints]
    return ParametricQp(n, n, _identity(n, n), gradient(objective), A, b, name=name)


# closed loop


@dataclass(frozen=True)
class ClosedLoopSystem:
    dynamics: ControlAffineSystem
    controller: ControllerMap
    barriers: tuple[tuple[PolyExpr, float], ...] = ()
    name: str = "closed_loop"

    def __post_init__(self):
        object.__setattr__(self, "barriers", tuple((h, float(a)) for h, a in self.barriers))
        if self.controller.input_dim != self.dynamics.m:
            raise DimensionError(f"controller returns {self.controller.input_dim} inputs, "
                                 f"dynamics take {self.dynamics.m}")
        if self.controller.state_dim != self.dynamics.n:
            raise DimensionError("controller and dynamics disagree on the state dimension")
        for h, a in self.barriers:
            if h.num_vars != self.dynamics.n:
                raise DimensionError("barrier dimension does not match the state")
            if a <= 0:
                raise ValueError("barrier gains must be positive")

    @property
    def n(self) -> int:
        return self.dynamics.n

    def input_at(self, x) -> np.ndarray:
        return self.controller(x)

    def field(self, x) -> np.ndarray:
        """``F(x, u*(x))``; raises :class:`ControllerInfeasible` where the controller is undefined."""
        return self.dynamics(x, self.controller(x))

    def barrier_values(self, x) -> np.ndarray:
        return np.array([h(x) for h, _ in self.barriers])


@dataclass
class Event:
    time: float
    kind: str  # solver_infeasible | barrier_crossed | step_rejected | nonfinite_state
    detail: str = ""


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    barrier_values: np.ndarray
    events: list[Event] = field(default_factory=list)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def to_csv(self) -> str:
        n = self.states.shape[1]
        m = self.inputs.shape[1]
        k = self.barrier_values.shape[1]
        buf = io.StringIO()
        cols = ["t"] + [f"x{i + 1}" for i in range(n)] + [f"u{i + 1}" for i in range(m)] + [f"h{i + 1}" for i in range(k)]
        buf.write(",".join(cols) + "\n")
        for row in np.column_stack([self.times, self.states, self.inputs, self.barrier_values]):
            buf.write(",".join(format(float(v), ".17g") for v in row) + "\n")
        for ev in self.events:
            buf.write(f"#event,{format(ev.time, '.17g')},{ev.kind},{ev.detail}\n")
        return buf.getvalue()


def _rk4_step(system: ClosedLoopSystem, x: np.ndarray, dt: float) -> np.ndarray:
    with np.errstate(over="ignore", invalid="ignore"):
        return _rk4_stages(system, x, dt)


def _rk4_stages(system: ClosedLoopSystem, x: np.ndarray, dt: float) -> np.ndarray:
    k1 = system.field(x)
    k2 = system.field(x + 0.5 * dt * k1)
    k3 = system.field(x + 0.5 * dt * k2)
    k4 = system.field(x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _refined_step(system, x, dt, depth):
    """Try one RK4 step, splitting it in halves up to ``depth`` times on failure."""
    try:
        y = _rk4_step(system, x, dt)
        if np.all(np.isfinite(y)):
            return y
    except ControllerInfeasible:
        pass
    if depth == 0:
        return None
    mid = _refined_step(system, x, 0.5 * dt, depth - 1)
    return None if mid is None else _refined_step(system, mid, 0.5 * dt, depth - 1)


def integrate(system: ClosedLoopSystem, x0, t_end: float, dt: float,
              refine_on_reject: bool = False, max_refinements: int = 4) -> Trajectory:
    """Fixed-step RK4 on the closed loop, re-solving the controller at every stage."""
    if dt <= 0 or t_end <= 0:
        raise ValueError("dt and t_end must be positive")
    x = np.asarray(x0, dtype=float).reshape(-1)
    if x.shape[0] != system.n:
        raise DimensionError(f"x0 has length {x.shape[0]}, expected {system.n}")
    u = system.input_at(x)  # infeasible start propagates as ControllerInfeasible
    nsteps = max(1, math.ceil(t_end / dt - 1e-9))
    times, states, inputs, hvals = [0.0], [x], [u], [system.barrier_values(x)]
    events: list[Event] = []
    t = 0.0
    for k in range(nsteps):
        step = min(dt, t_end - t) if k == nsteps - 1 else dt
        try:
            x_new = _rk4_step(system, x, step)
            bad = not np.all(np.isfinite(x_new))
            reason = "nonfinite_state" if bad else ""
        except ControllerInfeasible as exc:
            x_new, bad, reason = None, True, f"controller undefined near x={exc.x.tolist()}"
        if bad and refine_on_reject:
            events.append(Event(t, "step_rejected", reason))
            x_new = _refined_step(system, x, step, max_refinements)
            bad = x_new is None
        if bad:
            kind = "nonfinite_state" if reason == "nonfinite_state" else "solver_infeasible"
            events.append(Event(t, kind, reason or "refinement exhausted"))
            break
        t = (k + 1) * dt if k < nsteps - 1 else t_end
        try:
            u_new = system.input_at(x_new)
        except ControllerInfeasible as exc:
            events.append(Event(t, "solver_infeasible", str(exc)))
            break
        h_new = system.barrier_values(x_new)
        for j, (hp, hn) in enumerate(zip(hvals[-1], h_new)):
            if (hp >= 0.0) != (hn >= 0.0):
                events.append(Event(t, "barrier_crossed", f"h{j + 1} {hp:.3e} -> {hn:.3e}"))
        x = x_new
        times.append(t)
        states.append(x)
        inputs.append(u_new)
        hvals.append(h_new)
    k = len(system.barriers)
    return Trajectory(np.array(times), np.array(states), np.array(inputs),
                      np.array(hvals).reshape(len(times), k), events)


# curve verification


@dataclass
class ResidualResult:
    max_residual: float
    argmax_time: float
    times: np.ndarray
    residuals: np.ndarray
    tol: float

    @property
    def certified(self) -> bool:
        return self.max_residual <= self.tol


def residual_check(system: ClosedLoopSystem, curve, times=None, h_fd: float = 1e-4,
                   tol: float = RESIDUAL_TOL) -> ResidualResult:
    """Max over ``times`` of ``|xdot(t) - F(x(t), u*(x(t)))|`` with central differences.

    ``curve`` is either a callable ``t -> x(t)`` (differenced with step
    ``h_fd``) or a pair ``(times, states)`` of samples whose spacing must not
    exceed ``h_fd``.
    """
    if callable(curve):
        ts = np.asarray(times, dtype=float)
        if ts.ndim != 1 or ts.size < 3:
            raise ValueError("need at least three sample times")
        X = np.array([np.atleast_1d(curve(t)) for t in ts], dtype=float)
        Xd = np.array([(np.atleast_1d(curve(t + h_fd)) - np.atleast_1d(curve(t - h_fd))) / (2.0 * h_fd)
                       for t in ts])
    else:
        ts, X = (np.asarray(a, dtype=float) for a in curve)
        if ts.size < 3:
            raise ValueError("need at least three curve samples")
        X = X.reshape(ts.size, -1)
        if np.max(np.diff(ts)) > h_fd * (1.0 + 1e-9):
            raise ValueError(f"curve samples are farther apart than h_fd={h_fd}")
        Xd = np.gradient(X, ts, axis=0, edge_order=2)
    res = np.array([np.linalg.norm(xd - system.field(x)) for x, xd in zip(X, Xd)])
    k = int(np.argmax(res))
    return ResidualResult(float(res[k]), float(ts[k]), ts, res, tol)


# invariance monitors


@dataclass
class InvarianceReport:
    kind: str  # nagumo | minimal_bf | filippov_hull
    verdict: str  # holds | fails | inconclusive
    samples: np.ndarray
    margins: np.ndarray
    tol: float
    band: float | None
    excluded: list[tuple[list[float], str]] = field(default_factory=list)
    excursions: dict[str, float] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    @property
    def min_margin(self) -> float:
        return float(self.margins.min()) if self.margins.size else math.nan

    @property
    def worst_sample(self) -> list[float] | None:
        return self.samples[int(np.argmin(self.margins))].tolist() if self.margins.size else None


def boundary_samples(h: PolyExpr, lo, hi, count: int, seed: int = 0, newton_steps: int = 50) -> np.ndarray:
    """Points on ``{h = 0}`` inside the box ``[lo, hi]``, by Newton projection of Halton points."""
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    grad = PolyBatch(gradient(h), h.num_vars)
    sampler = qmc.Halton(d=h.num_vars, scramble=True, seed=seed)
    out = []
    tries = 0
    while len(out) < count and tries < 50:
        tries += 1
        for p in qmc.scale(sampler.random(2 * count), lo, hi):
            for _ in range(newton_steps):
                g = grad(p)
                gg = g @ g
                hv = h(p)
                if gg == 0.0 or abs(hv) <= 1e-14:
                    break
                p = p - hv * g / gg
            if abs(h(p)) <= 1e-12 and np.all(p >= lo) and np.all(p <= hi):
                out.append(p)
                if len(out) == count:
                    break
    return np.array(out).reshape(-1, h.num_vars)


def _default_band(x) -> float:
    return 1e-3 * (1.0 + float(np.linalg.norm(x)))


def _excursions(h: PolyExpr, curves) -> dict[str, float]:
    out = {}
    for label, curve in (curves or {}).items():
        states = curve.states if isinstance(curve, Trajectory) else np.asarray(curve, dtype=float)
        out[label] = float(min(h(x) for x in states))
    return out


def nagumo_monitor(system: ClosedLoopSystem, h: PolyExpr, boundary: Sequence, tol: float = MONITOR_TOL,
                   band: float | None = None, curves: dict | None = None) -> InvarianceReport:
    """Sub-tangentiality ``grad h(x) . F(x, u*(x)) >= -tol`` at samples of ``C`` near its boundary."""
    grad = PolyBatch(gradient(h), h.num_vars)
    kept, margins, excluded = [], [], []
    for x in np.atleast_2d(np.asarray(boundary, dtype=float)):
        hv = h(x)
        width = _default_band(x) if band is None else band
        g = grad(x)
        if hv < 0.0:
            excluded.append((x.tolist(), "outside C"))
        elif hv > width:
            excluded.append((x.tolist(), "outside boundary band"))
        elif not np.any(g):
            excluded.append((x.tolist(), "vanishing gradient"))
        else:
            try:
                margins.append(float(g @ system.field(x)))
                kept.append(x)
            except ControllerInfeasible:
                excluded.append((x.tolist(), "controller undefined"))
    margins = np.array(margins)
    verdict = "inconclusive" if not kept else ("holds" if margins.min() >= -tol else "fails")
    exc = _excursions(h, curves)
    notes = ["sub-tangentiality yields invariance only when closed-loop solutions are unique"]
    for label, low in exc.items():
        if low < -tol:
            notes.append(f"curve {label} leaves C (min h = {low:.6e}): invariance violated")
    return InvarianceReport("nagumo", verdict, np.array(kept).reshape(-1, h.num_vars), margins, tol, band,
                            excluded, exc, notes)


def minimal_bf_monitor(system: ClosedLoopSystem, h: PolyExpr, alpha: float, domain: Sequence,
                       band: float = 0.1, tol: float = MONITOR_TOL,
                       curves: dict | None = None) -> InvarianceReport:
    """``grad h . F + alpha h >= -tol`` on samples of the open band ``|h| < band``."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    grad = PolyBatch(gradient(h), h.num_vars)
    kept, margins, excluded = [], [], []
    for x in np.atleast_2d(np.asarray(domain, dtype=float)):
        hv = h(x)
        if abs(hv) >= band:
            excluded.append((x.tolist(), "outside band"))
            continue
        try:
            margins.append(float(grad(x) @ system.field(x) + alpha * hv))
            kept.append(x)
        except ControllerInfeasible:
            excluded.append((x.tolist(), "controller undefined"))
    margins = np.array(margins)
    verdict = "inconclusive" if not kept else ("holds" if margins.min() >= -tol else "fails")
    notes = ["when this holds, every solution starting in C stays in C, unique or not"]
    if verdict == "fails":
        bad = int(np.sum(margins < -tol))
        notes.append(f"{bad} of {len(margins)} band samples violate the inequality")
    return InvarianceReport("minimal_bf", verdict, np.array(kept).reshape(-1, h.num_vars), margins, tol, band,
                            excluded, _excursions(h, curves), notes)


def filippov_hull_condition(system: ClosedLoopSystem, h: PolyExpr, samples: Sequence, ball_radius: float = 1e-2,
                            hull_samples: int = 32, tol: float = MONITOR_TOL, band: float = 0.1,
                            seed: int = 0) -> InvarianceReport:
    """Worst ``grad h(x) . eta`` over field values ``eta`` sampled in a ball, at points just outside ``C``.

    The minimum of a linear functional over a convex hull is attained at a
    generator, so sampling generators gives an inner approximation of the
    Filippov set.
    """
    grad = PolyBatch(gradient(h), h.num_vars)
    pattern = np.vstack([np.zeros(h.num_vars), unit_ball_pattern(h.num_vars, hull_samples, seed)])
    kept, margins, excluded = [], [], []
    skipped = 0
    for x in np.atleast_2d(np.asarray(samples, dtype=float)):
        hv = h(x)
        if not -band < hv < 0.0:
            excluded.append((x.tolist(), "not in the outer band"))
            continue
        g = grad(x)
        vals = []
        for off in pattern:
            try:
                vals.append(float(g @ system.field(x + ball_radius * off)))
            except ControllerInfeasible:
                skipped += 1
        if not vals:
            excluded.append((x.tolist(), "controller undefined on the whole ball"))
            continue
        kept.append(x)
        margins.append(min(vals))
    margins = np.array(margins)
    verdict = "inconclusive" if not kept else ("holds" if margins.min() >= -tol else "fails")
    notes = ["sampled inner approximation of the Filippov set"]
    if skipped:
        notes.append(f"{skipped} ball evaluations skipped (controller undefined)")
    return InvarianceReport("filippov_hull", verdict, np.array(kept).reshape(-1, h.num_vars), margins, tol, band,
                            excluded, {}, notes)


__all__ = [
    "ClosedLoopSystem",
    "Event",
    "InvarianceReport",
    "ResidualResult",
    "Trajectory",
    "boundary_samples",
    "build_clf_cbf",
    "build_safety_filter",
    "build_sgf",
    "filippov_hull_condition",
    "integrate",
    "minimal_bf_monitor",
    "nagumo_monitor",
    "residual_check",
]
