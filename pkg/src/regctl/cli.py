"""Command-line front end: ``regctl {list,gallery,analyze,probe,simulate}``.

Exit codes: 0 on success, 2 when the computation fails (for example an
infeasible controller at the start state), 3 for bad input (unknown names,
unreadable spec files, malformed vectors or expressions).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import qmc

from regctl import closedloop as cl
from regctl import cqcheck, gallery, regprobe, report
from regctl.model import ControlAffineSystem, ParametricQp, ProblemSpecError, load_problem
from regctl.poly import DimensionError, PolyExpr, parse_poly
from regctl.qp import IndefiniteHessianError

EXIT_OK, EXIT_RUNTIME, EXIT_INPUT = 0, 2, 3

# options whose values may start with "-" (negative numbers, "-x2")
VALUE_OPTIONS = {"--point", "--center", "--segment", "--range", "--x0", "--barrier", "--objective",
                 "--constraint", "--direction", "--radii", "--steps", "--s-values", "--box", "--nominal"}


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _join_values(argv: list[str]) -> list[str]:
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok in VALUE_OPTIONS and i + 1 < len(argv):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def parse_vector(text: str, what: str = "vector") -> np.ndarray:
    try:
        vals = [float(t) for t in text.split(",")]
    except ValueError:
        raise InputError(f"{what}: cannot parse {text!r} as comma-separated numbers") from None
    if not all(np.isfinite(vals)):
        raise InputError(f"{what}: values must be finite")
    return np.array(vals)


def parse_segment(text: str) -> tuple[np.ndarray, np.ndarray]:
    if text.count(":") != 1:
        raise InputError(f"segment must look like a1,a2:b1,b2, got {text!r}")
    a, b = text.split(":")
    return parse_vector(a, "segment start"), parse_vector(b, "segment end")


def _positive(value: float, what: str) -> float:
    if not value > 0:
        raise InputError(f"{what} must be positive, got {value}")
    return value


# problem sources


@dataclass
class Source:
    name: str
    program: ParametricQp | None
    entry: gallery.GalleryEntry | None


def load_source(args) -> Source:
    if getattr(args, "gallery", None):
        try:
            entry = gallery.get_gallery(args.gallery)
        except gallery.UnknownGalleryEntry as exc:
            raise InputError(str(exc)) from None
        return Source(entry.name, entry.program, entry)
    path = Path(args.spec)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"cannot read spec file {path}: {exc.strerror}") from None
    try:
        prog = load_problem(text)
    except ProblemSpecError as exc:
        raise InputError(f"{path}: {exc}") from None
    return Source(prog.name, prog, None)


def controller_map(src: Source, component: int | None, closed_form: bool) -> regprobe.ControllerMap:
    """Map chosen by the flags; ``component`` is 1-based."""
    entry = src.entry
    if closed_form or src.program is None:
        if entry is None or entry.closed_form is None:
            raise InputError(f"{src.name} has no closed form")
        if component is not None and entry.component is not None and component - 1 != entry.component:
            raise InputError(f"the closed form of {src.name} gives component {entry.component + 1} only")
        return entry.closed_form
    fmap = regprobe.ControllerMap.from_program(src.program)
    if component is not None:
        if not 1 <= component <= src.program.m:
            raise InputError(f"component must be in 1..{src.program.m}")
        return fmap.component(component - 1)
    return fmap


def _check_dim(vec: np.ndarray, n: int, what: str) -> np.ndarray:
    if vec.shape[0] != n:
        raise InputError(f"{what} has {vec.shape[0]} entries, the problem has n={n}")
    return vec


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _csv_row(values) -> str:
    return ",".join(format(float(v), ".17g") for v in values)


# subcommands


def cmd_list(args) -> int:
    lines = [f"{e.name:<18}{e.notes}" for e in gallery.list_gallery()]
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_gallery(args) -> int:
    if args.list:
        return cmd_list(args)
    if not args.name:
        raise InputError("gallery needs --name or --list")
    src = load_source(argparse.Namespace(gallery=args.name))
    entry = src.entry
    use_closed = args.source == "closed-form" or (args.source is None and entry.closed_form is not None)
    fmap = controller_map(src, None, use_closed)
    if use_closed and entry.component is not None:
        ucols = [f"u{entry.component + 1}"]
    else:
        ucols = [f"u{i + 1}" for i in range(fmap.input_dim)]
    n = fmap.state_dim
    xcols = [f"x{i + 1}" for i in range(n)]
    if args.grid is not None:
        if n != 2:
            raise InputError("--grid needs a two-dimensional state")
        lo, hi = parse_vector(args.range, "range") if args.range else np.array([-1.0, 1.0])
        if args.grid < 2 or not hi > lo:
            raise InputError("--grid must be at least 2 and --range must be increasing")
        axis = np.linspace(lo, hi, args.grid)
        rows = [(a, b) for a in axis for b in axis]
    elif args.segment is not None:
        a, b = parse_segment(args.segment)
        _check_dim(a, n, "segment start")
        _check_dim(b, n, "segment end")
        if args.points < 2:
            raise InputError("--points must be at least 2")
        s = np.linspace(0.0, 1.0, args.points)
        rows = [tuple(a + si * (b - a)) for si in s]
    else:
        text = [f"name         {entry.name}", f"notes        {entry.notes}",
                f"program      {'yes' if entry.program is not None else 'no'}",
                f"closed form  {'yes' if entry.closed_form is not None else 'no'}",
                f"dynamics     {'yes' if entry.dynamics is not None else 'no'}"]
        if entry.program is not None:
            text.append(f"n, m, p      {entry.program.n}, {entry.program.m}, {entry.program.p}")
        _emit("\n".join(text) + "\n", args.out)
        return EXIT_OK
    lines = [",".join(xcols + ucols)]
    for x in rows:
        try:
            u = fmap(np.array(x))
        except regprobe.ControllerInfeasible:
            u = np.full(len(ucols), np.nan)
        lines.append(_csv_row(list(x) + list(u)))
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_analyze(args) -> int:
    src = load_source(args)
    if src.program is None:
        raise InputError(f"{src.name} has no polynomial program to analyze")
    x = _check_dim(parse_vector(args.point, "point"), src.program.n, "point")
    try:
        rep = cqcheck.analyze(src.program, x, include_lcf=not args.no_lcf, seed=args.seed)
    except ValueError as exc:
        sys.stderr.write(f"analyze: {exc}\n")
        return EXIT_RUNTIME
    if args.format == "csv":
        _emit(report.cq_report_csv(rep), args.out)
    else:
        _emit(report.format_cq_report(rep, src.name, cqcheck.implications(rep, src.program)), args.out)
    return EXIT_OK


def cmd_probe(args) -> int:
    src = load_source(args)
    fmap = controller_map(src, args.component, args.closed_form)
    n = fmap.state_dim
    center = _check_dim(parse_vector(args.center, "center"), n, "center") if args.center else np.zeros(n)
    radii = parse_vector(args.radii, "radii") if args.radii else regprobe.DEFAULT_RADII
    kind = args.kind
    try:
        if kind == "pair-quotient":
            if args.pairs not in regprobe.PAIR_FAMILIES:
                raise InputError(f"--pairs must be one of {sorted(regprobe.PAIR_FAMILIES)}")
            s_values = parse_vector(args.s_values, "s-values") if args.s_values else regprobe.DEFAULT_S_VALUES
            est = regprobe.pair_family_estimate(fmap, center, args.pairs, s_values)
        elif kind == "point-lipschitz":
            est = regprobe.point_lipschitz_estimate(fmap, center, radii, args.samples, args.seed)
        elif kind == "holder":
            est = regprobe.holder_fit(fmap, center, radii, args.samples, args.seed)
        elif kind == "directional":
            if not args.direction:
                raise InputError("--kind directional needs --direction")
            v = _check_dim(parse_vector(args.direction, "direction"), n, "direction")
            steps = parse_vector(args.steps, "steps") if args.steps else regprobe.DEFAULT_STEPS
            est = regprobe.directional_derivative(fmap, center, v, steps)
        elif kind == "jump":
            if args.segment:
                a, b = parse_segment(args.segment)
                _check_dim(a, n, "segment start")
                _check_dim(b, n, "segment end")
            else:
                a, b = center - 1.0, center + 1.0
            est = regprobe.jump_scan(fmap, (a, b), args.points, args.jump_tol)
        else:
            est = regprobe.boundedness_sweep(fmap, center, radii, args.samples, args.divergence_factor, args.seed)
    except InputError:
        raise
    except ValueError as exc:
        raise InputError(str(exc)) from None
    if args.format == "csv":
        _emit(est.to_csv(), args.out)
        sys.stderr.write(f"{est.kind}: {est.verdict} with hypothesis '{est.hypothesis}'\n")
    else:
        _emit(report.format_estimate(est, fmap.name), args.out)
    return EXIT_OK


def _build_simulation(args, x0: np.ndarray):
    """Closed loop, barriers and named curves requested by the flags."""
    curves = {}
    if args.sgf:
        if not args.objective:
            raise InputError("--sgf needs --objective")
        n = x0.shape[0]
        f = parse_poly(args.objective, n)
        gs = [parse_poly(c, n) for c in args.constraint]
        prog = cl.build_sgf(f, gs, args.alpha)
        dynamics = ControlAffineSystem.integrator(n)
        fmap = regprobe.ControllerMap.from_program(prog)
        barriers = [(-g, args.alpha) for g in gs]
        name = "sgf"
    else:
        src = load_source(args)
        if src.entry is not None:
            if src.entry.dynamics is None:
                raise InputError(f"{src.name} has no dynamics to simulate")
            dynamics = src.entry.dynamics
            fmap = src.entry.controller(closed_form=args.closed_form)
            barriers = list(src.entry.barriers)
            curves = gallery.CURVES.get(src.name, {})
        else:
            prog = src.program
            if prog.n != prog.m:
                raise InputError("spec-file programs are simulated as xdot = u and need m = n")
            dynamics = ControlAffineSystem.integrator(prog.n)
            fmap = regprobe.ControllerMap.from_program(prog)
            barriers = []
        name = src.name
    n = dynamics.n
    if args.barrier:
        barriers = [(parse_poly(args.barrier, n), args.alpha)]
    system = cl.ClosedLoopSystem(dynamics, fmap, barriers, name)
    return system, curves


def cmd_simulate(args) -> int:
    x0 = parse_vector(args.x0, "x0")
    _positive(args.t, "--t")
    _positive(args.dt, "--dt")
    _positive(args.alpha, "--alpha")
    try:
        system, curves = _build_simulation(args, x0)
    except (ValueError, DimensionError) as exc:
        raise InputError(str(exc)) from None
    _check_dim(x0, system.n, "x0")
    try:
        traj = cl.integrate(system, x0, args.t, args.dt, refine_on_reject=args.refine)
    except (regprobe.ControllerInfeasible, IndefiniteHessianError) as exc:
        sys.stderr.write(f"simulate: cannot start: {exc}\n")
        return EXIT_RUNTIME

    blocks = [report.format_trajectory_summary(traj)]
    if args.verify_curve:
        if args.verify_curve not in curves:
            raise InputError(f"unknown curve {args.verify_curve!r}; available: {sorted(curves) or 'none'}")
        ts = np.linspace(0.0, args.t, args.curve_samples)
        res = cl.residual_check(system, curves[args.verify_curve], ts, h_fd=1e-4)
        blocks.append(report.format_residual(args.verify_curve, res))
    if args.monitor:
        if not system.barriers:
            raise InputError("--monitor needs a barrier (--barrier or a gallery entry with one)")
        h, gain = system.barriers[0]
        box = parse_vector(args.box, "box") if args.box else np.array([-1.0, 1.0])
        lo, hi = np.full(system.n, box[0]), np.full(system.n, box[1])
        named = {label: np.array([c(t) for t in np.linspace(0.0, args.t, args.curve_samples)])
                 for label, c in curves.items()}
        named["trajectory"] = traj.states
        if args.monitor == "nagumo":
            pts = cl.boundary_samples(h, lo, hi, args.monitor_samples, seed=args.seed)
            rep = cl.nagumo_monitor(system, h, pts, curves=named)
        else:
            pts = qmc.scale(qmc.Halton(d=system.n, scramble=True, seed=args.seed).random(args.monitor_samples), lo, hi)
            if args.monitor == "minimal-bf":
                rep = cl.minimal_bf_monitor(system, h, gain, pts, band=args.band, curves=named)
            else:
                rep = cl.filippov_hull_condition(system, h, pts, band=args.band, seed=args.seed)
        blocks.append(report.format_invariance(rep))
    text = "\n".join(blocks)
    if args.format == "report":
        _emit(text, args.out)
    else:
        comments = "".join(f"# {line}\n" if line else "#\n" for line in text.splitlines())
        _emit(traj.to_csv() + comments, args.out)
    return EXIT_OK


# parser


def _add_source(p: argparse.ArgumentParser, required: bool = True) -> None:
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--gallery", metavar="NAME", help="gallery entry")
    g.add_argument("--spec", metavar="PATH", help="problem spec file (JSON)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="regctl", description="Regularity analysis of optimization-based controllers")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("list", help="list gallery entries")
    p.add_argument("--out")
    p.set_defaults(func=cmd_list)

    p = sub.add_parser("gallery", help="export closed-form or solver data for a gallery entry")
    p.add_argument("--name")
    p.add_argument("--list", action="store_true")
    p.add_argument("--grid", type=int, help="points per axis on a square grid")
    p.add_argument("--range", default=None, help="lo,hi of the grid axes (default -1,1)")
    p.add_argument("--segment", help="a:b with comma-separated endpoints")
    p.add_argument("--points", type=int, default=1001)
    p.add_argument("--source", choices=["closed-form", "solver"])
    p.add_argument("--out")
    p.set_defaults(func=cmd_gallery)

    p = sub.add_parser("analyze", help="constraint qualifications at a state")
    _add_source(p)
    p.add_argument("--point", required=True)
    p.add_argument("--no-lcf", action="store_true", help="skip the sampled boundedness heuristic")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=["report", "csv"], default="report")
    p.add_argument("--out")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("probe", help="sampled regularity probes of x -> u*(x)")
    _add_source(p)
    p.add_argument("--kind", required=True,
                   choices=["pair-quotient", "point-lipschitz", "holder", "directional", "jump", "boundedness"])
    p.add_argument("--component", type=int, help="1-based input component (default: full vector norm)")
    p.add_argument("--closed-form", action="store_true", help="probe the closed form instead of the solver")
    p.add_argument("--center")
    p.add_argument("--pairs", default="parabola")
    p.add_argument("--s-values")
    p.add_argument("--radii")
    p.add_argument("--samples", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--direction")
    p.add_argument("--steps")
    p.add_argument("--segment")
    p.add_argument("--points", type=int, default=1001)
    p.add_argument("--jump-tol", type=float, default=0.1)
    p.add_argument("--divergence-factor", type=float, default=regprobe.DIVERGENCE_FACTOR)
    p.add_argument("--format", choices=["report", "csv"], default="report")
    p.add_argument("--out")
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("simulate", help="integrate a closed loop and monitor invariance")
    _add_source(p, required=False)
    p.add_argument("--sgf", action="store_true", help="safe gradient flow from --objective/--constraint")
    p.add_argument("--objective")
    p.add_argument("--constraint", action="append", default=[], help="g(x) with feasible set g <= 0")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--x0", required=True)
    p.add_argument("--t", type=float, default=2.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--closed-form", action="store_true", help="drive the loop with the closed-form controller")
    p.add_argument("--refine", action="store_true", help="halve rejected steps before giving up")
    p.add_argument("--barrier", help="h(x) with safe set h >= 0")
    p.add_argument("--monitor", choices=["nagumo", "minimal-bf", "filippov"])
    p.add_argument("--monitor-samples", type=int, default=200)
    p.add_argument("--band", type=float, default=0.1)
    p.add_argument("--box", help="lo,hi of the sampling box for monitors (default -1,1)")
    p.add_argument("--verify-curve")
    p.add_argument("--curve-samples", type=int, default=2001)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=["csv", "report"], default="csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = _join_values(list(sys.argv[1:] if argv is None else argv))
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "simulate" and not args.sgf and not (args.gallery or args.spec):
            parser.error("simulate needs --gallery, --spec or --sgf")
    except SystemExit as exc:  # usage errors exit 3, --help exits 0
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (InputError, ProblemSpecError, DimensionError) as exc:
        sys.stderr.write(f"regctl {args.command}: {exc}\n")
        return EXIT_INPUT
    except (regprobe.ControllerInfeasible, IndefiniteHessianError, RuntimeError) as exc:
        sys.stderr.write(f"regctl {args.command}: {exc}\n")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
