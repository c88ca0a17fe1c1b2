import json

import pytest

from regctl.cli import main
from regctl.gallery import get_gallery
from regctl.model import dump_problem


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_list(capsys):
    code, out, _ = run(capsys, "list")
    assert code == 0 and out.splitlines()[0].startswith("robinson")


def test_gallery_list_and_surface(capsys, tmp_path):
    code, out, _ = run(capsys, "gallery", "--list")
    assert code == 0 and "sqrt_variant" in out
    target = tmp_path / "surface.csv"
    code, _, _ = run(capsys, "gallery", "--name", "robinson", "--grid", "11", "--range", "-1,1", "--out", str(target))
    lines = target.read_text().splitlines()
    assert code == 0 and lines[0] == "x1,x2,u4" and len(lines) == 1 + 121


def test_gallery_segment_step_data(capsys):
    code, out, _ = run(capsys, "gallery", "--name", "discontinuous_sc", "--segment", "-1:1", "--points", "5")
    rows = [line.split(",") for line in out.splitlines()[1:]]
    assert code == 0 and [r[-1] for r in rows] == ["2", "2", "2", "0", "0"]


def test_gallery_solver_source_matches(capsys):
    _, a, _ = run(capsys, "gallery", "--name", "scalar_qp", "--grid", "5", "--source", "closed-form")
    _, b, _ = run(capsys, "gallery", "--name", "scalar_qp", "--grid", "5", "--source", "solver")
    for ra, rb in zip(a.splitlines()[1:], b.splitlines()[1:]):
        assert float(ra.split(",")[-1]) == pytest.approx(float(rb.split(",")[-1]), abs=1e-9)


def test_analyze_robinson(capsys):
    code, out, _ = run(capsys, "analyze", "--gallery", "robinson", "--point", "0,0")
    assert code == 0
    blocks = {b.split("\n")[0]: b for b in out.split("\n\n")}
    assert "verdict            fails" in blocks["[LICQ]"]
    assert "verdict            holds" in blocks["[MFCQ]"]
    assert "verdict            holds" in blocks["[SLATER]"]
    assert "verdict            fails" in blocks["[CR]"]
    assert "[IMPLICATIONS]" in out


def test_analyze_discontinuous_csv(capsys):
    code, out, _ = run(capsys, "analyze", "--gallery", "discontinuous_sc", "--point", "0", "--format", "csv")
    assert code == 0 and "SLATER,fails," in out


def test_analyze_spec_file(capsys, tmp_path):
    path = tmp_path / "p.spec"
    path.write_text(dump_problem(get_gallery("scalar_qp").program))
    code, out, _ = run(capsys, "analyze", "--spec", str(path), "--point", "0.5,0.5", "--no-lcf")
    assert code == 0 and "[LCF_BOUNDED]" not in out


@pytest.mark.parametrize("argv", [
    ["analyze", "--spec", "missing.spec", "--point", "0"],
    ["analyze", "--gallery", "nosuch", "--point", "0"],
    ["analyze", "--gallery", "robinson", "--point", "0"],
    ["analyze", "--gallery", "robinson", "--point", "a,b"],
    ["probe", "--gallery", "robinson", "--kind", "warp", "--center", "0,0"],
    ["simulate", "--x0", "0"],
    ["gallery", "--name", "nosuch"],
    ["nosuch"],
])
def test_input_errors_exit_3(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 3 and err


def test_malformed_spec_exit_3(capsys, tmp_path):
    path = tmp_path / "bad.spec"
    path.write_text(json.dumps({"n": 1, "m": 1, "c": [{"row": 0, "terms": [{"coeff": 1, "powers": [1, 1]}]}]}))
    code, _, err = run(capsys, "analyze", "--spec", str(path), "--point", "0")
    assert code == 3 and "powers" in err


def test_infeasible_start_exit_2(capsys):
    code, _, err = run(capsys, "simulate", "--sgf", "--objective", "x1^2", "--constraint", "1 + x1^2",
                       "--x0", "0", "--t", "0.1", "--dt", "0.01")
    assert code == 2 and err


def test_analyze_without_optimizer_exit_2(capsys, tmp_path):
    one = [{"coeff": 1.0, "powers": [0]}]
    doc = {"n": 1, "m": 1, "p": 2, "Q": [{"row": 0, "col": 0, "terms": one}],
           "A": [{"row": 0, "col": 0, "terms": one}, {"row": 1, "col": 0, "terms": [{"coeff": -1.0, "powers": [0]}]}],
           "b": [{"row": 0, "terms": one}]}
    path = tmp_path / "infeasible.spec"
    path.write_text(json.dumps(doc))
    code, _, err = run(capsys, "analyze", "--spec", str(path), "--point", "0")
    assert code == 2 and "no optimizer" in err


def test_probe_pair_quotient(capsys):
    code, out, _ = run(capsys, "probe", "--gallery", "robinson", "--component", "4", "--center", "0,0",
                       "--kind", "pair-quotient", "--pairs", "parabola", "--format", "csv")
    rows = [line.split(",") for line in out.splitlines()[1:]]
    assert code == 0 and rows
    for s, _, q, sq in rows:
        assert float(sq) == pytest.approx(1.0, rel=1e-9)


def test_probe_boundedness_and_jump(capsys):
    code, out, _ = run(capsys, "probe", "--gallery", "unbounded_sc", "--center", "1,0", "--kind", "boundedness",
                       "--samples", "64")
    assert code == 0 and "violated" in out
    code, out, _ = run(capsys, "probe", "--gallery", "robinson", "--component", "4", "--center", "0,0",
                       "--kind", "jump", "--segment", "-1,0:1,0", "--points", "201")
    assert code == 0 and "consistent" in out


def test_probe_closed_form_only_entry(capsys):
    code, out, _ = run(capsys, "probe", "--gallery", "sqrt_variant", "--center", "0,0", "--kind", "holder",
                       "--samples", "32")
    assert code == 0 and "alpha" in out


def test_simulate_nagumo_report(capsys):
    code, out, _ = run(capsys, "simulate", "--gallery", "pl_nonunique", "--x0", "0,0", "--t", "0.5", "--dt", "0.01",
                       "--closed-form", "--monitor", "nagumo", "--barrier", "-x2", "--format", "report")
    assert code == 0 and "[NAGUMO]" in out and "verdict            holds" in out


def test_simulate_verify_curve(capsys):
    code, out, _ = run(capsys, "simulate", "--gallery", "pl_nonunique", "--x0", "0,0", "--t", "0.1", "--dt", "0.01",
                       "--closed-form", "--verify-curve", "y2", "--format", "report")
    assert code == 0 and "certified          true" in out


def test_simulate_sgf_csv(capsys):
    code, out, _ = run(capsys, "simulate", "--sgf", "--objective", "x1^2", "--constraint", "1-x1", "--alpha", "1",
                       "--x0", "2", "--t", "1", "--dt", "0.1", "--out", "-")
    lines = out.splitlines()
    assert code == 0 and lines[0] == "t,x1,u1,h1" and len([ln for ln in lines if ln[0].isdigit()]) == 11


def test_deterministic_output(capsys):
    argv = ["probe", "--gallery", "robinson", "--component", "4", "--center", "0,0", "--kind", "point-lipschitz",
            "--samples", "32", "--seed", "7", "--format", "csv"]
    _, a, _ = run(capsys, *argv)
    _, b, _ = run(capsys, *argv)
    assert a == b
