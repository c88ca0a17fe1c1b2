import math

import numpy as np
import pytest

from regctl.gallery import (
    UnknownGalleryEntry,
    clf_cbf_u,
    discontinuous_sc_u,
    get_gallery,
    list_gallery,
    pl_nonunique_field,
    robinson_u4,
    safety_filter_u,
    scalar_qp_u,
    sgf_scalar_u,
    sqrt_variant_u4,
    unbounded_sc_a,
    unbounded_sc_u,
)
from regctl.regprobe import ControllerInfeasible
from regctl.solver import evaluate_controller


def test_robinson_u4_examples():
    assert robinson_u4(1, 0.5) == 0.5
    assert robinson_u4(3.0, 0.0) == 0.0 and robinson_u4(-3.0, 0.0) == 0.0
    assert robinson_u4(1, 1) == pytest.approx(2 / 3)
    assert robinson_u4(0.0, 1.0) == 0.0


def test_sqrt_variant_examples():
    for x1 in (0.01, 0.25, 4.0):
        assert sqrt_variant_u4(x1, x1 / 2) == pytest.approx(math.sqrt(x1) / 2)
    assert sqrt_variant_u4(1, -1) == 0.0
    assert sqrt_variant_u4(0, 1) == 0.0


def test_scalar_closed_forms():
    assert [discontinuous_sc_u(v) for v in (-0.5, 0.0, 0.5)] == [2.0, 2.0, 0.0]
    assert unbounded_sc_u(1, 0) == 0.0
    assert unbounded_sc_u(1, 0.1) == pytest.approx(-(0.2 - 1e-4) / (2e-3))
    assert unbounded_sc_u(0, 1) == 0.0
    assert pl_nonunique_field(0, 0) == (0.5, 0.0)
    assert pl_nonunique_field(1, -1) == (0.5, 0.0)


def test_unbounded_undefined_region_is_empty(rng):
    # a(x1, 0) = 0 identically, so the closed form and the solver are defined everywhere
    prog = get_gallery("unbounded_sc").program
    for x1 in rng.uniform(-3, 3, 20):
        assert unbounded_sc_a(x1, 0.0) == 0.0
        assert unbounded_sc_u(x1, 0.0) == 0.0
        assert evaluate_controller(prog, [x1, 0.0]).status == "optimal"


@pytest.mark.parametrize("t", [0.0, 0.4, 1.0, 2.0])
def test_y2_rides_the_parabola(t):
    x = (t / 2, t * t / 8)
    assert pl_nonunique_field(*x)[1] == pytest.approx(t / 4, abs=1e-15)


def test_branch_boundaries_agree(rng):
    x1 = rng.uniform(-3, 3, 1000)
    x1 = x1[x1 != 0]
    # x2 = 0: first and second branches
    np.testing.assert_array_equal(0.0 / x1, np.zeros_like(x1))
    # x2 = x1^2/2: second and third branches
    x2 = x1 * x1 / 2
    np.testing.assert_allclose(x2 / x1, x1 * (x2 + 1) / (x1 * x1 + 2), rtol=0, atol=1e-12)
    # the implementation follows the branch boundaries without a jump
    for a in x1[:100]:
        b = a * a / 2
        assert abs(robinson_u4(a, b) - robinson_u4(a, b * (1 + 1e-13))) <= 1e-12
        assert abs(robinson_u4(a, 0.0) - robinson_u4(a, 1e-15)) <= 1e-12


def test_registry():
    names = [e.name for e in list_gallery()]
    assert names[:5] == ["robinson", "sqrt_variant", "discontinuous_sc", "unbounded_sc", "pl_nonunique"]
    rob = get_gallery("robinson")
    assert rob.program is not None and rob.component == 3
    sq = get_gallery("sqrt_variant")
    assert sq.program is None and sq.closed_form is not None
    with pytest.raises(ValueError):
        sq.solver_map()
    with pytest.raises(UnknownGalleryEntry, match="nosuch"):
        get_gallery("nosuch")


@pytest.mark.parametrize("entry", [e for e in list_gallery() if e.program is not None and e.closed_form is not None],
                         ids=lambda e: e.name)
def test_solver_agrees_with_closed_form(entry, rng):
    solver = entry.solver_map()
    checked = 0
    for x in rng.uniform(-2, 2, (200, entry.program.n)):
        if entry.name == "discontinuous_sc" and abs(x[0]) < 1e-6:
            continue
        try:
            want = entry.closed_form(x)
        except ControllerInfeasible:
            continue
        got = solver(x)
        assert np.allclose(got, want, atol=1e-6, rtol=1e-9), (x, got, want)
        checked += 1
    assert checked >= 150


def test_safety_filter_examples():
    prog = get_gallery("safety_filter").program
    assert evaluate_controller(prog, [-2.0]).u_star[0] == pytest.approx(1.0)
    assert evaluate_controller(prog, [0.0]).u_star[0] == pytest.approx(0.0, abs=1e-12)


def test_clf_cbf_example():
    prog = get_gallery("clf_cbf").program
    assert evaluate_controller(prog, [0.5]).u_star[0] == pytest.approx(-0.25)
    assert evaluate_controller(prog, [0.0]).u_star[0] == pytest.approx(0.0, abs=1e-12)


def test_sgf_scalar_examples():
    prog = get_gallery("sgf_scalar").program
    assert evaluate_controller(prog, [1.0]).u_star[0] == pytest.approx(0.0, abs=1e-12)
    # at x = 2 the constraint row xi >= 1 - x is active, so xi = -1 rather than -grad f = -4
    assert evaluate_controller(prog, [2.0]).u_star[0] == pytest.approx(-1.0)
    assert evaluate_controller(prog, [-0.5]).u_star[0] == pytest.approx(1.5)


def test_discontinuous_matches_away_from_zero():
    entry = get_gallery("discontinuous_sc")
    for x in np.concatenate([-np.logspace(-6, 1, 30), np.logspace(-6, 1, 30)]):
        assert entry.solver_map()([x])[0] == pytest.approx(discontinuous_sc_u(x), abs=1e-9)


def test_filter_closed_form_examples():
    assert safety_filter_u(-2.0) == 1.0 and safety_filter_u(0.5) == -0.5
    assert clf_cbf_u(0.5) == -0.25 and clf_cbf_u(-0.5) == 0.25 and clf_cbf_u(0.0) == 0.0
    assert sgf_scalar_u(2.0) == -1.0 and sgf_scalar_u(1.0) == 0.0
    assert scalar_qp_u(0.0, 0.0) == 0.0 and scalar_qp_u(1.0, 4.0) == 2.0
