import csv
import io
import json

import numpy as np
import pytest

from dtmm.cli import EXIT_DEGENERATE, EXIT_NUMERIC, EXIT_OK, EXIT_PARSE, main

HARMONIC = "order = 2\na0 = 1\ndomain = [0, 6.283185307179586]\nic = [0, 1]\ngrid = 65\n"
AIRY = "order = 2\na0 = x\ndomain = [-2, 2]\nic = [1, 0]\ngrid = 41\n"
EULER = "order = 4\na0 = -1/x^4\ndomain = [1, 2]\n"
SINE = "order = 2\na0 = 2 + sin(x)\ndomain = [0, 1]\n"


@pytest.fixture
def write(tmp_path):
    def _write(name, text):
        path = tmp_path / name
        path.write_text(text)
        return str(path)
    return _write


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def table(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_solve_harmonic(write, capsys, tmp_path):
    out_csv = tmp_path / "out.csv"
    code, out, _ = run(["solve", write("h.txt", HARMONIC), "--oracle", "--out", str(out_csv)], capsys)
    assert code == EXIT_OK
    report = json.loads(out)
    rows = table(out_csv.read_text())
    assert list(rows[0]) == ["x", "re_f", "im_f", "gap", "re_oracle_f", "im_oracle_f"]
    xs = np.array([float(r["x"]) for r in rows])
    f = np.array([float(r["re_f"]) for r in rows])
    assert np.max(np.abs(f - np.sin(xs))) < 1e-8
    assert report["diagnostics"]["max_oracle_rel_err"] < 1e-8
    assert report["outputs"] == [str(out_csv)]


def test_solve_with_derivative_columns(write, capsys):
    code, out, err = run(["solve", write("h.txt", HARMONIC), "--derivs"], capsys)
    assert code == EXIT_OK
    rows = table(out)
    assert list(rows[0])[:5] == ["x", "re_f", "im_f", "re_f1", "im_f1"]
    x = float(rows[10]["x"])
    assert float(rows[10]["re_f1"]) == pytest.approx(np.cos(x), abs=1e-8)
    assert json.loads(err)["command"] == "solve"


def test_solve_airy_reports_turning_point(write, capsys):
    code, _, err = run(["solve", write("a.txt", AIRY)], capsys)
    assert code == EXIT_OK
    (s,) = json.loads(err)["diagnostics"]["singularities"]
    assert abs(s["xi"]) < 1e-9 and s["kind"] == "A"


def test_singularities_command(write, capsys):
    code, out, _ = run(["singularities", write("a.txt", AIRY)], capsys)
    assert code == EXIT_OK
    (row,) = table(out)
    assert row["kind"] == "A"


def test_transfer_identity_and_determinants(write, capsys):
    code, out, err = run(["transfer", write("s.txt", SINE), "0.5", "0.5"], capsys)
    assert code == EXIT_OK
    Q = {(r["row"], r["col"]): complex(float(r["re_q"]), float(r["im_q"])) for r in table(out)}
    assert Q[("0", "0")] == 1 and Q[("0", "1")] == 0
    assert json.loads(err)["diagnostics"]["det_rel_deviation"] == 0

    code, _, err = run(["transfer", write("s.txt", SINE), "0", "1"], capsys)
    d = json.loads(err)["diagnostics"]
    assert d["det_rel_deviation"] < 1e-6
    assert d["det"]["re"] == pytest.approx(np.sqrt(2) / np.sqrt(2 + np.sin(1)), abs=1e-6)

    code, _, err = run(["transfer", write("e.txt", EULER), "1", "2"], capsys)
    assert code == EXIT_OK
    assert json.loads(err)["diagnostics"]["det"]["re"] == pytest.approx(64, abs=1e-4)


def test_basis_command(write, capsys):
    code, out, err = run(["basis", write("h.txt", HARMONIC)], capsys)
    assert code == EXIT_OK
    rows = table(out)
    assert list(rows[0]) == ["x", "re_g1", "im_g1", "re_g2", "im_g2", "re_W", "im_W"]
    assert json.loads(err)["diagnostics"]["min_abs_wronskian"] > 0


def test_verify_harmonic_passes(write, capsys):
    code, out, _ = run(["verify", write("h.txt", HARMONIC)], capsys)
    assert code == EXIT_OK
    assert all(r["status"] == "pass" for r in table(out))


def test_verify_euler_cauchy(write, capsys):
    code, out, _ = run(["verify", write("e.txt", EULER)], capsys)
    rows = {r["check"]: r for r in table(out)}
    assert code == EXIT_OK
    for name in ("abel_wronskian", "det_formula"):
        assert rows[name]["status"] == "pass"
        assert float(rows[name]["deviation"]) < float(rows[name]["tolerance"])


def test_verify_singular_problem_reports_jump_distance(write, capsys):
    code, out, _ = run(["verify", write("a.txt", AIRY)], capsys)
    row = {r["check"]: r for r in table(out)}["singularity_jump_limit"]
    assert code == EXIT_OK
    assert 0 < float(row["deviation"]) < 5e-2


def test_malformed_file(write, capsys, tmp_path):
    dest = tmp_path / "never.csv"
    code, out, err = run(["solve", write("bad.txt", "order = 2\na0 = 1 +\n"), "--out", str(dest)],
                         capsys)
    assert code == EXIT_PARSE
    assert not dest.exists()
    assert out == "" and "parse error" in err


def test_missing_file(capsys, tmp_path):
    code, _, err = run(["solve", str(tmp_path / "nope.txt")], capsys)
    assert code == EXIT_PARSE and "cannot read" in err


def test_solve_without_ic(write, capsys):
    code, _, err = run(["solve", write("e.txt", EULER)], capsys)
    assert code == EXIT_PARSE and "ic" in err


def test_entirely_degenerate_domain(write, capsys):
    code, _, err = run(["singularities", write("z.txt", "order=2; a0=0; domain=[0,1]")], capsys)
    assert code == EXIT_DEGENERATE and err


def test_numeric_failure(write, capsys):
    # the initial point sits on the turning point
    code, _, err = run(["solve", write("t.txt", "order=2; a0=x; domain=[0,1]; ic=[1,0]; grid=5")],
                       capsys)
    assert code == EXIT_NUMERIC and "numeric failure" in err


def test_output_is_deterministic(write, capsys):
    path = write("a.txt", AIRY)
    first = run(["solve", path, "--derivs", "--oracle"], capsys)
    second = run(["solve", path, "--derivs", "--oracle"], capsys)
    assert first[1] == second[1]
    assert json.loads(first[2])["inputs_digest"] == json.loads(second[2])["inputs_digest"]


def test_flags_override_file(write, capsys):
    path = write("a.txt", AIRY)
    _, ode, err_o = run(["solve", path, "--method", "ode"], capsys)
    _, exp, err_e = run(["solve", path, "--method", "exp", "--step", "0.002"], capsys)
    assert ode != exp
    assert json.loads(err_o)["inputs_digest"] != json.loads(err_e)["inputs_digest"]
