"""
Solving a parametric QP pointwise
=================================

A parametric program freezes into an ordinary convex QP once the state is
fixed.  This script solves the four-input Robinson program at a few states,
compares the fourth input with its closed form, and writes surface data for
a plot of u4 over the square [-1, 1]^2.

Run:  python3 demos/01_solver_and_gallery.py [surface.csv]
"""

import sys

import numpy as np

from regctl.gallery import get_gallery, robinson_u4
from regctl.solver import evaluate_controller, projected_gradient_qp

entry = get_gallery("robinson")
prog = entry.program
print(f"{entry.name}: n={prog.n} states, m={prog.m} inputs, p={prog.p} constraints")

# At the origin all four constraints are active but only three are independent.
# The solver still returns the optimizer and a nonnegative multiplier vector.
sol = evaluate_controller(prog, [0.0, 0.0])
print("origin    u* =", sol.u_star, " lambda* =", sol.lambda_star, " active =", sol.active_set)
print("          KKT residuals:", sol.stationarity_residual, sol.complementarity_residual, sol.feasibility_violation)

# The three branches of the closed form: below the axis, under the parabola
# x2 = x1^2/2, and above it.
for x in [(0.5, -1.0), (1.0, 0.5), (1.0, 1.0)]:
    sol = evaluate_controller(prog, x)
    print(f"x={x}  solver u4 = {sol.u_star[3]: .12f}  closed form = {robinson_u4(*x): .12f}")

# An independent first-order solver agrees with the active-set result.
inst = prog.evaluate([0.3, 0.7])
print("dual projected gradient vs active set:",
      np.abs(projected_gradient_qp(inst) - evaluate_controller(prog, [0.3, 0.7]).u_star).max())

# Surface data: one row per grid point, columns x1, x2, u4.
axis = np.linspace(-1.0, 1.0, 41)
rows = [(a, b, evaluate_controller(prog, (a, b)).u_star[3]) for a in axis for b in axis]
worst = max(abs(u - robinson_u4(a, b)) for a, b, u in rows)
print(f"41x41 grid: max |solver - closed form| = {worst:.2e}")
if len(sys.argv) > 1:
    np.savetxt(sys.argv[1], rows, delimiter=",", header="x1,x2,u4", comments="", fmt="%.17g")
    print("wrote", sys.argv[1])
