"""Reference problems with known answers.

Each entry pairs a parametric program (shipped as a spec file under
``regctl/specs``) with a closed-form controller where one is known.  The
closed forms are written independently of the solver and serve as test
oracles for it.

=================  =====================================================
robinson           four-input QP whose optimizer is Hoelder and
                   point-Lipschitz but not locally Lipschitz at 0
sqrt_variant       same shape with sqrt(|x1|) data; not point-Lipschitz
                   (closed form only: the data are not polynomial)
discontinuous_sc   scalar QP without Slater at 0; optimizer jumps 2 -> 0
unbounded_sc       scalar QP without Slater at (1, 0); optimizer unbounded
pl_nonunique       xdot = (1/2, u4*(x)): two solutions from the origin
scalar_qp          scalar QP with Slater everywhere (locally Lipschitz)
safety_filter      CBF filter for xdot = u, h = -x, nominal u = 1
clf_cbf            CLF-CBF filter for xdot = u on [-1, 1]
sgf_scalar         safe gradient flow for min x^2 s.t. x >= 1
=================  =====================================================
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources

from regctl.model import ControlAffineSystem, ParametricQp, load_problem
from regctl.poly import PolyExpr
from regctl.regprobe import ControllerInfeasible, ControllerMap


class UnknownGalleryEntry(KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unknown gallery entry"


# closed forms


def robinson_u4(x1: float, x2: float) -> float:
    if x2 <= 0.0:
        return 0.0
    if x1 != 0.0 and x1 * x1 / 2.0 >= x2:
        return x2 / x1
    return x1 * (x2 + 1.0) / (x1 * x1 + 2.0)


def sqrt_variant_u4(x1: float, x2: float) -> float:
    r = math.sqrt(abs(x1))
    if x2 <= 0.0:
        return 0.0
    if x1 != 0.0 and abs(x1) / 2.0 >= x2:
        return x2 / r
    return r * (x2 + 1.0) / (abs(x1) + 2.0)


def discontinuous_sc_u(x: float) -> float:
    return 2.0 if x <= 0.0 else 0.0


def unbounded_sc_a(x1: float, x2: float) -> float:
    return 2.0 * x1 * x2 + x2 * x2 * (1.0 - x1 * x1 - x2 * x2)


def unbounded_sc_u(x1: float, x2: float) -> float:
    """Optimizer of the unbounded example; raises where the program is infeasible."""
    a = unbounded_sc_a(x1, x2)
    if a <= 0.0:
        return 0.0
    if x2 == 0.0:
        raise ControllerInfeasible((x1, x2))
    return -a / (2.0 * x2 ** 3)


def pl_nonunique_field(x1: float, x2: float) -> tuple[float, float]:
    return 0.5, robinson_u4(x1, x2)


def scalar_qp_u(x1: float, x2: float) -> float:
    return max(x1, x2 / (1.0 + x1 * x1), (x1 - 1.0) / (1.0 + x2 * x2))


def safety_filter_u(x: float) -> float:
    return min(1.0, -x)


def clf_cbf_u(x: float) -> float:
    if x > 0.0:
        return min(0.0, -x / 2.0, (1.0 - x * x) / (2.0 * x))
    if x < 0.0:
        return max(0.0, -x / 2.0, (1.0 - x * x) / (2.0 * x))
    return 0.0


def sgf_scalar_u(x: float) -> float:
    return max(-2.0 * x, 1.0 - x)


def y1_curve(t: float) -> tuple[float, float]:
    return 0.5 * t, 0.0


def y2_curve(t: float) -> tuple[float, float]:
    return 0.5 * t, t * t / 8.0


def z_curve(t: float) -> tuple[float, float]:
    """Not a solution: its second component grows faster than u4 allows."""
    return 0.5 * t, t


# analytic curves attached to gallery entries, by entry name
CURVES = {"pl_nonunique": {"y1": y1_curve, "y2": y2_curve, "z": z_curve}}


# registry


@dataclass(frozen=True)
class GalleryEntry:
    name: str
    program: ParametricQp | None
    closed_form: ControllerMap | None
    dynamics: ControlAffineSystem | None
    notes: str
    component: int | None = None  # solver output (0-based) matched by a scalar closed form
    barriers: tuple[tuple[PolyExpr, float], ...] = ()

    def __post_init__(self):
        if self.program is None and self.closed_form is None:
            raise ValueError(f"gallery entry {self.name} needs a program or a closed form")

    def solver_map(self, full: bool = False) -> ControllerMap:
        """Solver-backed map; restricted to ``component`` unless ``full`` is set."""
        if self.program is None:
            raise ValueError(f"{self.name} has no polynomial program; use its closed form")
        fmap = ControllerMap.from_program(self.program)
        return fmap if full or self.component is None else fmap.component(self.component)

    def controller(self, closed_form: bool = False) -> ControllerMap:
        """The map driving ``dynamics``: solver-backed unless asked for (or limited to) the closed form."""
        if closed_form or self.program is None:
            if self.closed_form is None:
                raise ValueError(f"{self.name} has no closed form")
            return self.closed_form
        return self.solver_map()


def load_spec(name: str) -> ParametricQp:
    text = resources.files("regctl").joinpath("specs").joinpath(f"{name}.spec").read_text()
    return load_problem(text)


def _pl_dynamics() -> ControlAffineSystem:
    """``xdot = (1/2, 0) + u (0, 1)``, driven by the fourth Robinson input."""
    zero, one = PolyExpr.zero(2), PolyExpr.constant(2, 1.0)
    return ControlAffineSystem(2, 1, [PolyExpr.constant(2, 0.5), zero], [[zero, one]])


def _build() -> dict[str, GalleryEntry]:
    x = PolyExpr.var(1, 0)
    x2 = PolyExpr.var(2, 1)
    fn = ControllerMap.from_function
    robinson = load_spec("robinson")
    entries = [
        GalleryEntry("robinson", robinson, fn(robinson_u4, 2, 1, "robinson_u4"), None,
                     "strongly convex QP with Slater everywhere; u4 not locally Lipschitz at the origin",
                     component=3),
        GalleryEntry("sqrt_variant", None, fn(sqrt_variant_u4, 2, 1, "sqrt_variant_u4"), None,
                     "sqrt(|x1|) data break point-Lipschitzness at the origin; closed form only",
                     component=3),
        GalleryEntry("discontinuous_sc", load_spec("discontinuous_sc"), fn(discontinuous_sc_u, 1, 1),
                     ControlAffineSystem.integrator(1),
                     "Slater fails at x = 0; optimizer is 2 for x <= 0 and 0 otherwise"),
        GalleryEntry("unbounded_sc", load_spec("unbounded_sc"), fn(unbounded_sc_u, 2, 1), None,
                     "Slater fails at (1, 0); optimizer grows like radius^-2 there"),
        GalleryEntry("pl_nonunique", robinson, fn(robinson_u4, 2, 1, "robinson_u4"), _pl_dynamics(),
                     "xdot = (1/2, u4*(x)): point-Lipschitz field with two solutions from the origin",
                     component=3, barriers=((-x2, 1.0),)),
        GalleryEntry("scalar_qp", load_spec("scalar_qp"), fn(scalar_qp_u, 2, 1), None,
                     "single input with Slater everywhere; optimizer locally Lipschitz"),
        GalleryEntry("safety_filter", load_spec("safety_filter"), fn(safety_filter_u, 1, 1),
                     ControlAffineSystem.integrator(1),
                     "xdot = u, h = -x, nominal 1, alpha 1: u* = min(1, -x)", barriers=((-x, 1.0),)),
        GalleryEntry("clf_cbf", load_spec("clf_cbf"), fn(clf_cbf_u, 1, 1), ControlAffineSystem.integrator(1),
                     "xdot = u, h = 1 - x^2, V = W = x^2, nominal 0", barriers=((1.0 - x * x, 1.0),)),
        GalleryEntry("sgf_scalar", load_spec("sgf_scalar"), fn(sgf_scalar_u, 1, 1),
                     ControlAffineSystem.integrator(1),
                     "safe gradient flow for min x^2 s.t. 1 - x <= 0; equilibrium x = 1",
                     barriers=((x - 1.0, 1.0),)),
    ]
    return {e.name: e for e in entries}


_REGISTRY: dict[str, GalleryEntry] | None = None


def _registry() -> dict[str, GalleryEntry]:
    global _REGISTRY
    if _REGISTRY is None:
        _REGISTRY = _build()
    return _REGISTRY


def list_gallery() -> list[GalleryEntry]:
    return list(_registry().values())


def get_gallery(name: str) -> GalleryEntry:
    try:
        return _registry()[name]
    except KeyError:
        raise UnknownGalleryEntry(f"unknown gallery entry {name!r}; known: {', '.join(_registry())}") from None
