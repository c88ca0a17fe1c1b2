"""
Two solutions and a safe set that is not invariant
==================================================

Feed u4 into xdot = (1/2, u4(x)).  The field is point-Lipschitz at the
origin, but two different curves leave it.  A fixed-step integrator can
follow only one of them, so the second is certified by its residual instead.
"""

import numpy as np

from regctl.closedloop import (
    ClosedLoopSystem,
    boundary_samples,
    integrate,
    minimal_bf_monitor,
    nagumo_monitor,
    residual_check,
)
from regctl.gallery import CURVES, get_gallery
from regctl.poly import parse_poly

entry = get_gallery("pl_nonunique")
system = ClosedLoopSystem(entry.dynamics, entry.controller(closed_form=True), entry.barriers, "pl_nonunique")
curves = CURVES["pl_nonunique"]

ts = np.linspace(0.0, 2.0, 2001)
for name in ("y1", "y2", "z"):
    res = residual_check(system, curves[name], ts)
    print(f"{name}: max residual {res.max_residual:.2e}  solution: {res.certified}")

# RK4 from the origin stays on x2 = 0.  Tiny perturbations pick a branch.
for x0 in [(0.0, 0.0), (0.0, 1e-6), (0.0, -1e-6)]:
    traj = integrate(system, x0, 2.0, 1e-3)
    print(f"from {x0}: x(2) = {traj.final_state}")

# With h = -x2 the safe set is the lower half plane.  The field is tangent on
# its boundary, so the Nagumo test passes, yet y2 leaves the set at once.
h = parse_poly("-x2", 2)
rep = nagumo_monitor(system, h, boundary_samples(h, (-2, -1), (2, 1), 200),
                     curves={"y2": np.array([curves["y2"](t) for t in ts])})
print("Nagumo:", rep.verdict, " min h along y2:", rep.excursions["y2"])

# The stronger minimal barrier inequality looks at a band around the boundary
# and correctly refuses to certify invariance.
grid = np.array([(a, b) for a in np.linspace(-1, 1, 41) for b in np.linspace(-0.09, 0.09, 19)])
rep = minimal_bf_monitor(system, h, 1.0, grid)
print("minimal barrier:", rep.verdict, "-", rep.notes[-1])
