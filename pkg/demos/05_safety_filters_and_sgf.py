"""
Safety filters and the safe gradient flow
=========================================

Builders turn a barrier function, a Lyapunov function or an optimization
problem into a parametric QP.  The closed loop re-solves that QP at every
integrator stage.
"""

import numpy as np

from regctl.closedloop import (
    ClosedLoopSystem,
    build_clf_cbf,
    build_safety_filter,
    build_sgf,
    integrate,
    minimal_bf_monitor,
)
from regctl.model import ControlAffineSystem
from regctl.poly import PolyExpr, parse_poly
from regctl.regprobe import ControllerMap
from regctl.solver import evaluate_controller

x = parse_poly("x1", 1)
integrator = ControlAffineSystem.integrator(1)

# Safety filter: keep x <= 0 while tracking the nominal input 1.
sf = build_safety_filter(integrator, -x, 1.0, [PolyExpr.constant(1, 1.0)])
loop = ClosedLoopSystem(integrator, ControllerMap.from_program(sf), ((-x, 1.0),))
traj = integrate(loop, [-2.0], 5.0, 0.01)
print(f"safety filter: x(5) = {traj.final_state[0]:.6f}, min h = {traj.barrier_values.min():.2e}")
band = np.linspace(-0.099, 0.099, 41)[:, None]
print("  minimal barrier condition on the band:", minimal_bf_monitor(loop, -x, 1.0, band).verdict)

# CLF-CBF filter on [-1, 1] with V = W = x^2.
cc = build_clf_cbf(integrator, 1 - x * x, x * x, x * x, 1.0, [PolyExpr.zero(1)])
print("CLF-CBF u*(0.5) =", evaluate_controller(cc, [0.5]).u_star[0])
traj = integrate(ClosedLoopSystem(integrator, ControllerMap.from_program(cc)), [0.9], 4.0, 0.01)
print(f"  x(4) = {traj.final_state[0]:.6f}  (exact 0.9 e^-2 = {0.9 * np.exp(-2):.6f})")

# Safe gradient flow for min x^2 s.t. x >= 1.  From x = 2 the constraint row is
# active the whole way, giving x(t) = 1 + e^-t.
sgf = build_sgf(x * x, [1 - x], 1.0)
traj = integrate(ClosedLoopSystem(integrator, ControllerMap.from_program(sgf)), [2.0], 10.0, 0.01)
print(f"SGF: x(10) = {traj.final_state[0]:.8f}, 1 + e^-10 = {1 + np.exp(-10):.8f}")

# Two dimensions: min |x|^2 s.t. x1 + x2 >= 1 converges to (1/2, 1/2).
sgf2 = build_sgf(parse_poly("x1^2 + x2^2", 2), [parse_poly("1 - x1 - x2", 2)], 1.0)
loop2 = ClosedLoopSystem(ControlAffineSystem.integrator(2), ControllerMap.from_program(sgf2))
print("SGF in 2-D: x(10) =", integrate(loop2, [2.0, 0.0], 10.0, 0.01).final_state)
