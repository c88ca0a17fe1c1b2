"""Plain-text and CSV renderings of analysis results.

Reports are fixed-width text with one ``[NAME]`` block per condition so that
two runs can be compared with ``diff``.  Numbers use a fixed number of
decimals; magnitudes of a million or more switch to scientific notation.
"""

from __future__ import annotations

import csv
import io
import math

import numpy as np

from regctl.closedloop import InvarianceReport, ResidualResult, Trajectory
from regctl.cqcheck import CqReport
from regctl.regprobe import RegularityEstimate

DECIMALS = 10
LABEL_WIDTH = 19


def fmt_num(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if abs(v) >= 1e6:
        return f"{v:.{DECIMALS}e}"
    text = f"{v:.{DECIMALS}f}"
    # values that round to zero print without a sign
    return text[1:] if text.startswith("-") and not text.strip("-0.") else text


def fmt_value(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, dict):
        return "{" + ", ".join(f"{k}: {fmt_value(w)}" for k, w in v.items()) + "}"
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(fmt_value(w) for w in v) + "]"
    if v is None:
        return "none"
    return fmt_num(v)


def _line(label: str, value) -> str:
    # long labels still get one separating space
    return f"  {label:<{LABEL_WIDTH - 1}} {fmt_value(value)}"


def format_cq_report(report: CqReport, program_name: str, implications: list[str] = ()) -> str:
    out = [f"PROGRAM {program_name}", _line("x", report.x)]
    sol = report.solution
    if sol is not None:
        out.append(_line("status", sol.status))
        if sol.u_star is not None:
            out.append(_line("u*", sol.u_star))
            out.append(_line("lambda*", sol.lambda_star))
            out.append(_line("active", [i + 1 for i in sol.active_set]))
            out.append(_line("kkt", {"stationarity": sol.stationarity_residual,
                                     "complementarity": sol.complementarity_residual,
                                     "feasibility": sol.feasibility_violation}))
    for name, entry in report.entries.items():
        out.append("")
        out.append(f"[{name}]")
        out.append(_line("verdict", entry.verdict))
        for key, val in entry.certificate.items():
            if key in ("active", "witness_rows"):
                val = [i + 1 for i in val]
            elif key == "witness" and isinstance(val, dict):
                val = {**val, "subset": [i + 1 for i in val["subset"]]}
            elif key == "witness":
                val = [i + 1 for i in val]
            elif key == "varying_subsets":
                val = [[i + 1 for i in s] for s in val]
            out.append(_line(key, val))
        out.append(_line("detail", entry.detail))
    if implications:
        out.append("")
        out.append("[IMPLICATIONS]")
        out.extend(f"  {s}" for s in implications)
    return "\n".join(out) + "\n"


def cq_report_csv(report: CqReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["condition", "verdict", "detail"])
    for name, entry in report.entries.items():
        w.writerow([name, entry.verdict, entry.detail])
    return buf.getvalue()


def format_estimate(est: RegularityEstimate, title: str = "") -> str:
    out = [f"[{est.kind.upper()}]" + (f" {title}" if title else "")]
    out.append(_line("hypothesis", est.hypothesis))
    out.append(_line("verdict", f"{est.verdict} with hypothesis"))
    for key, val in est.params.items():
        out.append(_line(key, val))
    if est.seed is not None:
        out.append(_line("seed", est.seed))
    out.append(_line("samples", len(est.records)))
    out.append(_line("skipped", est.skipped))
    return "\n".join(out) + "\n"


def format_invariance(rep: InvarianceReport) -> str:
    out = [f"[{rep.kind.upper()}]"]
    out.append(_line("verdict", rep.verdict))
    out.append(_line("samples", len(rep.margins)))
    out.append(_line("min margin", rep.min_margin))
    out.append(_line("worst at", rep.worst_sample))
    out.append(_line("tol", rep.tol))
    out.append(_line("band", "default 1e-3*(1+|x|)" if rep.band is None else rep.band))
    out.append(_line("excluded", len(rep.excluded)))
    for label, low in rep.excursions.items():
        out.append(_line(f"min h {label}", low))
    for note in rep.notes:
        out.append(_line("note", note))
    return "\n".join(out) + "\n"


def format_residual(label: str, res: ResidualResult) -> str:
    return "\n".join([
        f"[RESIDUAL] {label}",
        _line("max residual", f"{res.max_residual:.6e}"),
        _line("at t", res.argmax_time),
        _line("tol", res.tol),
        _line("certified", res.certified),
    ]) + "\n"


def format_trajectory_summary(traj: Trajectory) -> str:
    out = ["[TRAJECTORY]",
           _line("steps", len(traj.times) - 1),
           _line("t final", traj.times[-1]),
           _line("x final", traj.final_state)]
    if traj.barrier_values.size:
        out.append(_line("min h", traj.barrier_values.min(axis=0)))
    out.append(_line("events", len(traj.events)))
    kinds = sorted({e.kind for e in traj.events})
    for k in kinds:
        out.append(_line(k, sum(e.kind == k for e in traj.events)))
    return "\n".join(out) + "\n"
