"""
Constraint qualifications with certificates
===========================================

Which regularity a QP controller has depends on which constraint
qualifications hold at the state.  ``analyze`` solves the program and then
checks LICQ, MFCQ, Slater, strict complementarity, constant rank and a
sampled local-boundedness heuristic.  Every verdict carries the numbers that
justify it.
"""

from regctl.cqcheck import analyze, check_slater, implications
from regctl.gallery import get_gallery
from regctl.report import format_cq_report

# Robinson's program at the origin: Slater and MFCQ hold, LICQ and constant rank fail.
robinson = get_gallery("robinson").program
report = analyze(robinson, [0.0, 0.0])
print(format_cq_report(report, "robinson", implications(report, robinson)))

# Slater can be screened before solving anything.  The margin LP gives a strictly
# feasible point when one exists; otherwise the cone test returns multipliers
# that combine the constraints into 0 >= 0.
for name, x in [("discontinuous_sc", [0.0]), ("discontinuous_sc", [0.5]), ("unbounded_sc", [1.0, 0.0])]:
    entry = check_slater(get_gallery(name).program, x)
    print(f"{name:<17} x={x}: Slater {entry.verdict:<6} {entry.detail}")

# A single-input program with Slater everywhere: constant rank holds and the
# optimizer is locally Lipschitz.
scalar = get_gallery("scalar_qp").program
rep = analyze(scalar, [0.4, -0.2])
print()
print({k: e.verdict for k, e in rep.entries.items()})
for line in implications(rep, scalar):
    print("  =>", line)
