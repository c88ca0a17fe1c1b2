import numpy as np
import pytest

from regctl.cqcheck import (
    CqEntry,
    CqReport,
    analyze,
    check_cr,
    check_lcf_bounded,
    check_licq,
    check_mfcq,
    check_scs,
    check_slater,
    implications,
)
from regctl.gallery import list_gallery, load_spec
from regctl.model import ParametricQp
from regctl.poly import PolyExpr
from regctl.solver import evaluate_controller

ROBINSON = load_spec("robinson")
DISC = load_spec("discontinuous_sc")
UNB = load_spec("unbounded_sc")


def const_program(A, b, c=None):
    """Program in one state variable whose data do not depend on it."""
    A, b = np.atleast_2d(A), np.asarray(b, dtype=float)
    p, m = A.shape
    k = lambda v: PolyExpr.constant(1, float(v))
    Q = [[k(1.0 if i == j else 0.0) for j in range(m)] for i in range(m)]
    c = np.zeros(m) if c is None else c
    return ParametricQp(1, m, Q, [k(v) for v in c], [[k(v) for v in row] for row in A], [k(v) for v in b])


def solved(program, x):
    return evaluate_controller(program, x)


def test_licq_robinson_origin_fails_with_rank_three():
    e = check_licq(ROBINSON, [0, 0], solved(ROBINSON, [0, 0]))
    assert e.verdict == "fails" and e.certificate["rank"] == 3
    # the reported dependence combines the active rows to zero
    A = ROBINSON.evaluate([0, 0]).A
    np.testing.assert_allclose(np.array(e.certificate["dependence"]) @ A, 0.0, atol=1e-12)


def test_licq_single_active_and_empty():
    prog = const_program([[1.0, 0.0]], [1.0])
    assert check_licq(prog, [0.0], solved(prog, [0.0])).verdict == "holds"
    prog = const_program([[1.0, 0.0]], [-1.0])
    e = check_licq(prog, [0.0], solved(prog, [0.0]))
    assert e.verdict == "holds" and e.certificate["active"] == []


def test_licq_invariant_under_row_rescaling(rng):
    A = ROBINSON.evaluate([0, 0]).A
    b = ROBINSON.evaluate([0, 0]).b
    base = const_program(A, b)
    for _ in range(5):
        d = rng.uniform(1e-3, 1e3, 4)
        prog = const_program(d[:, None] * A, d * b)
        assert check_licq(prog, [0.0], solved(prog, [0.0])).verdict == check_licq(base, [0.0], solved(base, [0.0])).verdict


def test_mfcq_robinson_origin():
    e = check_mfcq(ROBINSON, [0, 0], solved(ROBINSON, [0, 0]))
    assert e.verdict == "holds"
    assert e.certificate["t"] == pytest.approx(1.0)
    np.testing.assert_allclose(e.certificate["z"][2], 1.0)


def test_mfcq_discontinuous_origin_fails():
    e = check_mfcq(DISC, [0.0], solved(DISC, [0.0]))
    assert e.verdict == "fails" and e.certificate["t"] == pytest.approx(0.0, abs=1e-12)


def test_mfcq_vacuous():
    prog = const_program([[1.0]], [-5.0])
    assert check_mfcq(prog, [0.0], solved(prog, [0.0])).verdict == "holds"


@pytest.mark.parametrize("x", [[0, 0], [1, 1], [-2, 3], [0.5, -1]])
def test_slater_robinson_holds(x):
    e = check_slater(ROBINSON, x)
    assert e.verdict == "holds"
    inst = ROBINSON.evaluate(x)
    assert np.all(inst.A @ e.certificate["u_hat"] > inst.b)
    u = np.array([0, 0, 2 + abs(x[1]), 0])
    assert np.all(inst.A @ u > inst.b)


def test_slater_fails_at_named_points():
    d = check_slater(DISC, [0.0])
    u = check_slater(UNB, [1.0, 0.0])
    assert d.verdict == "fails" and "mu" in d.certificate
    assert u.verdict == "fails" and "mu" in u.certificate


def test_slater_infeasible_program():
    prog = const_program([[1.0], [-1.0]], [1.0, 0.0])
    e = check_slater(prog, [0.0])
    assert e.verdict == "fails" and "not applicable" in e.certificate["cone_test"]


def test_scs_examples():
    prog = const_program([[1.0]], [0.0])  # active at u = 0 with zero multiplier
    assert check_scs(prog, [0.0], solved(prog, [0.0])).verdict == "fails"
    prog = const_program([[1.0]], [1.0])  # lambda = 1
    assert check_scs(prog, [0.0], solved(prog, [0.0])).verdict == "holds"
    e = check_scs(ROBINSON, [0, 0], solved(ROBINSON, [0, 0]))
    assert e.verdict == "holds"
    np.testing.assert_allclose(e.certificate["multipliers"], 0.25, atol=1e-9)


def test_scs_robinson_lower_half_plane():
    sol = solved(ROBINSON, [0.0, -1.0])
    assert sol.u_star[3] == pytest.approx(0.0, abs=1e-12)
    inst = ROBINSON.evaluate([0.0, -1.0])
    slack = inst.A @ sol.u_star - inst.b
    assert slack[3] > 1e-3 and sol.lambda_star[3] == 0.0
    e = check_scs(ROBINSON, [0.0, -1.0], sol)
    # row 4 is inactive, so it never appears among the witnesses
    assert 3 not in e.certificate.get("witness", [])


def test_cr_constant_rows_hold():
    prog = const_program(ROBINSON.evaluate([0, 0]).A, ROBINSON.evaluate([0, 0]).b)
    assert check_cr(prog, [0.0], solved(prog, [0.0])).verdict == "holds"


def test_cr_robinson_origin():
    e = check_cr(ROBINSON, [0, 0], solved(ROBINSON, [0, 0]))
    assert e.verdict == "fails"
    assert e.certificate["witness"]["subset"] == [0, 1, 2, 3]
    assert sorted(e.certificate["witness"]["ranks"]) == [3, 4]
    assert [3] not in e.certificate["varying_subsets"]


def test_cr_scalar_qp_holds(rng):
    prog = load_spec("scalar_qp")
    for x in rng.uniform(-2, 2, (10, 2)):
        assert check_cr(prog, x, solved(prog, x)).verdict == "holds"


def test_cr_rejects_many_rows():
    prog = const_program(np.ones((13, 1)), -np.ones(13))
    with pytest.raises(ValueError, match="exceeds"):
        check_cr(prog, [0.0], solved(prog, [0.0]))


def test_lcf_examples():
    assert check_lcf_bounded(UNB, [1.0, 0.0]).verdict == "fails"
    assert check_lcf_bounded(ROBINSON, [0.0, 0.0]).verdict == "holds"
    e = check_lcf_bounded(DISC, [0.0])
    assert e.verdict == "holds" and max(e.certificate["sup_norm"]) == pytest.approx(2.0)


def test_analyze_robinson_origin_report():
    rep = analyze(ROBINSON, [0, 0])
    assert {k: e.verdict for k, e in rep.entries.items()} == {
        "LICQ": "fails", "MFCQ": "holds", "SLATER": "holds", "SCS": "holds", "CR": "fails", "LCF_BOUNDED": "holds"}
    assert any("point-Lipschitz" in s for s in implications(rep, ROBINSON))


def test_analyze_without_optimizer():
    prog = const_program([[1.0], [-1.0]], [1.0, 0.0])
    with pytest.raises(ValueError, match="no optimizer"):
        analyze(prog, [0.0])


def test_consistency_rule_downgrades_contradiction():
    rep = CqReport(np.zeros(1), {"SLATER": CqEntry("holds"), "MFCQ": CqEntry("fails", {"t": 0.0})})
    rep.enforce_consistency()
    assert rep.verdict("MFCQ") == "inconclusive"


@pytest.mark.parametrize("entry", [e for e in list_gallery() if e.program is not None], ids=lambda e: e.name)
def test_report_level_implications_on_random_states(entry, rng):
    prog = entry.program
    for x in rng.uniform(-2, 2, (100, prog.n)):
        if evaluate_controller(prog, x).status != "optimal":
            continue
        rep = analyze(prog, x, include_lcf=False)
        v = {k: e.verdict for k, e in rep.entries.items()}
        assert "inconclusive" not in v.values(), (x, v)
        if v["SLATER"] == "holds":
            assert v["MFCQ"] == "holds"
        if v["LICQ"] == "holds":
            assert v["MFCQ"] == "holds" and v["CR"] == "holds"
