"""
Probing the regularity of a controller map
==========================================

Sampling cannot prove a map is Lipschitz, but it can refute it.  These probes
look at Robinson's u4 and its relatives from several angles.
"""

import math

from regctl.gallery import get_gallery
from regctl.regprobe import (
    ControllerMap,
    boundedness_sweep,
    directional_derivative,
    holder_fit,
    jump_scan,
    pair_family_estimate,
    point_lipschitz_estimate,
)

u4 = get_gallery("robinson").solver_map()

# Pairs (s, s^2/2) and (s, 0) sit a distance s^2/2 apart, yet u4 differs by s/2.
# The quotient is exactly 1/s, so no Lipschitz constant works near the origin.
est = pair_family_estimate(u4, (0.0, 0.0), "parabola")
for s, q in zip(est.params["s"], est.params["quotient"]):
    print(f"s = {s:<6g} quotient = {q:10.4f}   s * quotient = {s * q:.12f}")
print("local Lipschitz:", est.verdict)

# Against the origin itself the growth is bounded: u4 is point-Lipschitz there.
est = point_lipschitz_estimate(u4, (0.0, 0.0), samples_per_radius=128)
print("point-Lipschitz at 0:", est.verdict, "with L ~", round(est.params["L"], 4))

# The sqrt variant loses even that: the sup quotient grows like r^(-1/2).
sq = get_gallery("sqrt_variant").closed_form
est = point_lipschitz_estimate(sq, (0.0, 0.0), radii=[10.0 ** -k for k in range(1, 8)])
print("sqrt variant point-Lipschitz at 0:", est.verdict, f"(sup grew {est.params['growth']:.0f}x)")

# Hoelder exponents come from a log-log fit of the sup increment against the radius.
for alpha in (0.25, 0.5, 1.0):
    f = ControllerMap.from_function(lambda a, b, alpha=alpha: math.hypot(a, b) ** alpha, 2)
    print(f"|x|^{alpha}: fitted alpha = {holder_fit(f, (0.0, 0.0), samples_per_radius=64).params['alpha']:.4f}")
print("u4 at 0: fitted alpha =", round(holder_fit(u4, (0.0, 0.0), samples_per_radius=64).params["alpha"], 4))

# One-sided difference quotients settle, so u4 is directionally differentiable at 0.
print("directional derivative along (1, 1):", directional_derivative(u4, (0.0, 0.0), (1.0, 1.0)).params["limit"])

# A jump scan finds the step of the program that loses Slater at 0.
est = jump_scan(get_gallery("discontinuous_sc").solver_map(), ((-1.0,), (1.0,)))
print("jumps on [-1, 1]:", est.params["jumps"])

# Near (1, 0) the other Slater-free program blows up like radius^-2.
est = boundedness_sweep(get_gallery("unbounded_sc").solver_map(), (1.0, 0.0), radii=[1e-1, 1e-2, 1e-3, 1e-4])
print("sup |u*| by radius:", [f"{v:.3g}" for v in est.params["sup_norm"]],
      "slope", round(est.params["loglog_slope"], 3), "->", est.verdict)
