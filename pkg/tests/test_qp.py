import itertools
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from regctl.gallery import load_spec
from regctl.model import load_problem
from regctl.qp import IndefiniteHessianError, NonSymmetricError, QpInstance, solve_qp
from regctl.solver import evaluate_controller, projected_gradient_qp

ROBINSON = load_spec("robinson")


def random_qp(seed, m=None, p=None):
    """Strongly convex QP with a strictly feasible point built in."""
    rng = np.random.default_rng(seed)
    m = m or int(rng.integers(1, 7))
    p = int(rng.integers(0, 9)) if p is None else p
    M = rng.normal(size=(m, m))
    Q = M @ M.T + 0.1 * np.eye(m)
    c = rng.normal(size=m) * 2
    A = rng.normal(size=(p, m))
    u0 = rng.normal(size=m)
    b = A @ u0 - rng.uniform(0, 1, p)
    return QpInstance(Q, c, A, b)


def test_robinson_origin():
    sol = solve_qp(ROBINSON.evaluate([0.0, 0.0]))
    assert sol.ok
    np.testing.assert_allclose(sol.u_star, [0, 0, 1, 0], atol=1e-12)
    assert sol.objective == pytest.approx(0.5)
    assert sol.active_set == (0, 1, 2, 3)


def test_robinson_origin_against_grid():
    inst = ROBINSON.evaluate([0.0, 0.0])
    axis = np.round(np.arange(-2.0, 2.0 + 1e-9, 0.05), 10)
    u1, u2, u3 = np.meshgrid(axis, axis, axis, indexing="ij")
    block = np.stack([u1.ravel(), u2.ravel(), u3.ravel()], axis=1)
    best, arg = np.inf, None
    for u4 in axis:
        pts = np.column_stack([block, np.full(len(block), u4)])
        ok = np.all(pts @ inst.A.T >= inst.b - 1e-12, axis=1)
        if not ok.any():
            continue
        vals = 0.5 * np.sum(pts[ok] ** 2, axis=1)
        k = int(np.argmin(vals))
        if vals[k] < best:
            best, arg = vals[k], pts[ok][k]
    assert best == pytest.approx(0.5)
    np.testing.assert_allclose(arg, [0, 0, 1, 0], atol=1e-12)
    assert solve_qp(inst).objective <= best + 1e-12


def test_unconstrained_returns_nominal():
    k = np.array([1.5, -2.0])
    sol = solve_qp(QpInstance(np.eye(2), -k, np.zeros((0, 2)), []))
    np.testing.assert_allclose(sol.u_star, k)


def test_robinson_at_one_one():
    assert evaluate_controller(ROBINSON, [1.0, 1.0]).u_star[3] == pytest.approx(2 / 3, abs=1e-12)


@pytest.mark.parametrize("s", [0.1, 0.5, 2.0])
def test_robinson_branches(s):
    assert evaluate_controller(ROBINSON, [s, 0.0]).u_star[3] == pytest.approx(0.0, abs=1e-12)
    assert evaluate_controller(ROBINSON, [s, s * s / 2]).u_star[3] == pytest.approx(s / 2, abs=1e-12)


def test_discontinuous_values():
    prog = load_spec("discontinuous_sc")
    assert evaluate_controller(prog, [-1.0]).u_star[0] == pytest.approx(2.0)
    assert evaluate_controller(prog, [1.0]).u_star[0] == pytest.approx(0.0, abs=1e-12)


def test_infeasible_certificate():
    A = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]])
    b = np.array([1.0, 0.0, -5.0])
    sol = solve_qp(QpInstance(np.eye(2), np.zeros(2), A, b))
    assert sol.status == "infeasible"
    y = sol.certificate
    assert np.all(y >= -1e-12)
    np.testing.assert_allclose(A.T @ y, 0.0, atol=1e-10)
    assert b @ y > 0


def test_unbounded_when_flat_direction_descends():
    Q = np.diag([1.0, 0.0])
    sol = solve_qp(QpInstance(Q, [0.0, -1.0], [[1.0, 0.0]], [0.0]))
    assert sol.status == "unbounded"


def test_semidefinite_bounded_by_constraint():
    Q = np.diag([1.0, 0.0])
    sol = solve_qp(QpInstance(Q, [0.0, -1.0], [[0.0, -1.0]], [-3.0]))
    assert sol.ok
    np.testing.assert_allclose(sol.u_star, [0.0, 3.0], atol=1e-12)


def test_indefinite_rejected_with_eigenvalue():
    with pytest.raises(IndefiniteHessianError) as info:
        solve_qp(QpInstance(np.diag([1.0, -2.0]), [0, 0], np.zeros((0, 2)), []))
    assert info.value.min_eig == pytest.approx(-2.0)


def test_indefinite_reports_state():
    one = [{"coeff": 1.0, "powers": [0]}]
    prog = load_problem(json.dumps({"n": 1, "m": 1, "p": 0, "Q": [
        {"row": 0, "col": 0, "terms": one + [{"coeff": -1.0, "powers": [2]}]}]}))
    with pytest.raises(IndefiniteHessianError) as info:
        evaluate_controller(prog, [2.0])
    assert info.value.x is not None and info.value.x[0] == 2.0


def test_nonsymmetric_rejected():
    with pytest.raises(NonSymmetricError):
        QpInstance([[1.0, 1.0], [0.0, 1.0]], [0, 0], np.zeros((0, 2)), [])


def test_state_dimension_checked():
    with pytest.raises(ValueError):
        evaluate_controller(ROBINSON, [0.0])


def test_zero_row_with_positive_rhs_is_infeasible():
    sol = solve_qp(QpInstance([[1.0]], [0.0], [[0.0]], [1.0]))
    assert sol.status == "infeasible"


@given(st.integers(0, 10_000))
def test_kkt_invariants(seed):
    inst = random_qp(seed)
    sol = solve_qp(inst)
    assert sol.ok
    assert max(sol.stationarity_residual, sol.complementarity_residual, sol.feasibility_violation) <= 1e-8
    assert np.all(sol.lambda_star >= 0)
    inactive = [i for i in range(inst.p) if i not in sol.active_set]
    np.testing.assert_array_equal(sol.lambda_star[inactive], 0.0)
    slack = inst.A @ sol.u_star - inst.b
    assert np.all(np.abs(sol.lambda_star * slack) <= 1e-8 * (1 + np.abs(sol.lambda_star)))
    hist = np.array(sol.objective_history)
    assert np.all(np.diff(hist) <= 1e-12 * (1 + np.abs(hist[:-1])))


@given(st.integers(0, 10_000), st.floats(1e-3, 1e3))
def test_scaling_invariance(seed, gamma):
    inst = random_qp(seed)
    scaled = QpInstance(gamma * inst.Q, gamma * inst.c, inst.A, inst.b)
    np.testing.assert_allclose(solve_qp(scaled).u_star, solve_qp(inst).u_star, atol=1e-8, rtol=0)


@given(st.integers(0, 10_000))
def test_matches_projected_gradient_oracle(seed):
    inst = random_qp(seed)
    np.testing.assert_allclose(solve_qp(inst).u_star, projected_gradient_qp(inst), atol=1e-6, rtol=0)


def test_matches_enumeration_of_active_sets():
    # independent oracle: brute-force KKT over all active sets of small QPs
    for seed in range(40):
        inst = random_qp(seed, m=3, p=5)
        best = None
        for k in range(inst.p + 1):
            for S in itertools.combinations(range(inst.p), k):
                S = list(S)
                K = np.block([[inst.Q, -inst.A[S].T], [inst.A[S], np.zeros((k, k))]])
                try:
                    z = np.linalg.solve(K, np.concatenate([-inst.c, inst.b[S]]))
                except np.linalg.LinAlgError:
                    continue
                u, lam = z[:3], z[3:]
                if np.all(lam >= -1e-10) and np.all(inst.A @ u >= inst.b - 1e-10):
                    best = u
                    break
            if best is not None:
                break
        np.testing.assert_allclose(solve_qp(inst).u_star, best, atol=1e-9)
