import numpy as np
import pytest
from scipy.optimize import linprog

from regctl.lp import solve_lp


def test_bounded_max():
    res = solve_lp(A_ineq=[[-1.0], [1.0]], b_ineq=[-3.0, 0.0], objective=[1.0], sense="max")
    assert res.status == "optimal" and res.value == pytest.approx(3.0)


def test_unbounded_max():
    res = solve_lp(A_ineq=[[1.0]], b_ineq=[0.0], objective=[1.0], sense="max")
    assert res.status == "unbounded"


def test_infeasible():
    res = solve_lp(A_ineq=[[1.0], [-1.0]], b_ineq=[1.0, 0.0], objective=[1.0])
    assert res.status == "infeasible"


def test_normalized_cone_slice_feasible():
    # mu >= 0, sum mu = 1, mu * 0 = 0 for a single constraint with zero data
    res = solve_lp(A_eq=[[1.0], [0.0]], b_eq=[1.0, 0.0], A_ineq=[[1.0]], b_ineq=[0.0], objective=[0.0])
    assert res.status == "optimal" and res.x[0] == pytest.approx(1.0)


def test_bad_sense_and_sizes():
    with pytest.raises(ValueError):
        solve_lp(objective=[1.0], sense="up")
    with pytest.raises(ValueError):
        solve_lp(A_ineq=[[1.0]], b_ineq=[0.0, 1.0], objective=[1.0])


def test_matches_scipy_on_random_bounded_lps(rng):
    for _ in range(100):
        n, k = rng.integers(1, 5), rng.integers(1, 7)
        A = rng.normal(size=(k, n))
        x0 = rng.normal(size=n)
        b = A @ x0 - rng.uniform(0, 1, k)
        # box keeps the problem bounded; constraints are written as A x >= b
        Ab = np.vstack([A, np.eye(n), -np.eye(n)])
        bb = np.concatenate([b, -5 * np.ones(n), -5 * np.ones(n)])
        c = rng.normal(size=n)
        ours = solve_lp(A_ineq=Ab, b_ineq=bb, objective=c)
        ref = linprog(c, A_ub=-Ab, b_ub=-bb, bounds=[(None, None)] * n, method="highs")
        assert ours.status == "optimal"
        assert ours.value == pytest.approx(ref.fun, abs=1e-8)
        assert np.all(Ab @ ours.x >= bb - 1e-9)
