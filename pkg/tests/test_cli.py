import csv
import json
import math
import os
import subprocess
import sys

import pytest

from conftest import problem
from riccati_disc.cli import main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def write(tmp_path, doc, name="p.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc) if not isinstance(doc, str) else doc)
    return p


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_estimate_ex0(capsys, tmp_path):
    out_csv = tmp_path / "e.csv"
    code, out, _ = run(capsys, "estimate", problem("ex0.json"), "--order", 2, "--out", out_csv)
    assert code == 0
    assert "TwoHyperbolic, Δ ∈ [0.5, 0.5]" in out
    rows = read_csv(out_csv)
    assert rows[0] == ["order", "mu_lo", "mu_hi", "delta_lo", "delta_hi"]
    assert len(rows) == 3
    assert float(rows[2][3]) == pytest.approx(0.5, abs=1e-12)


def test_estimate_example2(capsys):
    code, out, _ = run(capsys, "estimate", problem("ex2.json"))
    assert code == 0
    assert out.strip().splitlines()[-1].startswith("NoCycles, Δ ∈ [-0.380")


def test_estimate_precheck(capsys):
    code, out, _ = run(capsys, "estimate", problem("gamma_one.json"))
    assert code == 0
    assert "pre-check" in out and "NoCycles" in out


def test_estimate_general_form_is_reduced(capsys):
    code, out, _ = run(capsys, "estimate", problem("ex3_general.json"))
    assert code == 0 and "TwoHyperbolic" in out


def test_estimate_undetermined_exit_code(capsys):
    code, out, _ = run(capsys, "estimate", problem("ex3_general.json"), "--order", 1)
    assert code == 3 and "Undetermined" in out


def test_csv_is_bit_stable(capsys, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run(capsys, "estimate", problem("ex2.json"), "--out", a)
    run(capsys, "estimate", problem("ex2.json"), "--out", b)
    assert a.read_bytes() == b.read_bytes()


def test_oracle_constant(capsys, tmp_path):
    prof, cyc = tmp_path / "d.csv", tmp_path / "c.csv"
    code, out, _ = run(capsys, "oracle", problem("gamma_minus_one.json"), "--out", prof,
                       "--cycles-out", cyc, "--samples", 50)
    assert code == 0 and "TwoHyperbolic" in out
    rows = read_csv(cyc)
    assert rows[0][:3] == ["x0", "h", "stability"]
    assert [float(r[0]) for r in rows[1:]] == pytest.approx([-1, 1], abs=1e-8)
    prof_rows = read_csv(prof)
    assert len(prof_rows) == 51
    assert any(r[1] == "ESC" for r in prof_rows[1:])


def test_oracle_general_form(capsys):
    code, out, _ = run(capsys, "oracle", problem("ex3_general.json"))
    assert code == 0
    assert out.count("cycle x0=") == 2 and "TwoHyperbolic" in out


def test_oracle_ex0(capsys):
    code, out, _ = run(capsys, "oracle", problem("ex0.json"))
    assert code == 0 and "attractive" in out and "repulsive" in out


def test_family_example3(capsys, tmp_path):
    anchors, env = tmp_path / "a.csv", tmp_path / "e.csv"
    code, out, _ = run(capsys, "family", problem("ex3_family.json"), "--order", 3, "--points", 5,
                       "--anchors-out", anchors, "--envelope-out", env)
    assert code == 0
    line = [l for l in out.splitlines() if l.startswith("eta* in")][0]
    lo, hi = (float(v) for v in line.split("[")[1].rstrip("]").split(","))
    assert lo == pytest.approx(0.505, abs=2e-3) and hi == pytest.approx(0.907, abs=2e-3)
    assert read_csv(anchors)[0] == ["eta0", "K", "L", "M"]
    rows = read_csv(env)
    assert rows[0] == ["eta", "mu_L", "mu_U", "gamma_bar"] and len(rows) == 513


def test_family_degenerate_direction(capsys):
    code, _, err = run(capsys, "family", problem("degenerate_family.json"))
    assert code == 1 and "s_inf = 0" in err


def test_reduce_example3(capsys, tmp_path):
    out_file, rec_file = tmp_path / "c.json", tmp_path / "r.json"
    code, _, err = run(capsys, "reduce", problem("ex3_general.json"), "--param", "eta=1",
                       "--out", out_file, "--record-out", rec_file)
    assert code == 0
    assert "-2.038675" in err
    code, out, _ = run(capsys, "estimate", out_file, "--order", 1)
    assert code in (0, 3)
    assert json.loads(rec_file.read_text())["kind"] == "nonvanishing"


def test_reduce_identity(capsys, tmp_path):
    p = write(tmp_path, {"a2": "1", "a1": "0", "a0": "cos(t) - 1"})
    code, out, _ = run(capsys, "reduce", p)
    assert code == 0
    from riccati_disc.periodic import PeriodicFn
    g = PeriodicFn.from_expr(json.loads(out)["gamma"])
    assert g(0.3) == pytest.approx(math.cos(0.3) - 1, abs=1e-14)


def test_reduce_vanishing_a2_exit4(capsys):
    code, _, err = run(capsys, "reduce", problem("uve_vanishing.json"))
    assert code == 4 and "t* = 2.356194" in err


def test_reduce_singular(capsys, tmp_path):
    out_file = tmp_path / "c.json"
    code, _, _ = run(capsys, "reduce", problem("uve_nonvanishing.json"), "--u0", -1,
                     "--out", out_file)
    assert code == 0
    code, out, _ = run(capsys, "oracle", out_file)
    assert code == 0 and "TwoHyperbolic" in out


def test_hb_tables(capsys, tmp_path):
    out_csv = tmp_path / "hb.csv"
    code, out, _ = run(capsys, "hb", problem("ex2.json"), "--order", 2, "--out", out_csv)
    assert code == 0 and "-0.847707598" in out
    rows = read_csv(out_csv)
    assert rows[0] == ["order", "mu_n", "k", "cos_k", "sin_k"] and len(rows) == 4


@pytest.mark.parametrize("doc", [
    "{not json",
    {"period": 6.28},
    {"gamma": "sin(t)", "a2": "1", "a1": "0", "a0": "0"},
    {"a2": "1", "a1": "0"},
    {"gamma": "sin(t) +"},
    {"gamma": "sin(t)", "period": -1},
    {"gamma": "sin(t)", "extra": 1},
    {"gamma": "1/(cos(t) - 1)"},
    {"gamma": "eta*sin(t)"},
    {"family": {"base": "cos(t)", "dir": "1", "eta_min": 1, "eta_max": 0}},
])
def test_input_errors_exit1(capsys, tmp_path, doc):
    code, _, err = run(capsys, "estimate", write(tmp_path, doc))
    assert code == 1 and err.startswith("error:")


def test_param_override(capsys, tmp_path):
    p = write(tmp_path, {"gamma": "c + cos(t)", "params": {"c": -1.0}})
    assert run(capsys, "estimate", p)[0] == 0
    code, out, _ = run(capsys, "estimate", p, "--param", "c=2")
    assert code == 0 and "pre-check" in out
    assert run(capsys, "estimate", p, "--param", "c")[0] == 1


def test_wrong_form_for_command(capsys):
    assert run(capsys, "family", problem("ex0.json"))[0] == 1
    assert run(capsys, "reduce", problem("ex0.json"))[0] == 1
    assert run(capsys, "oracle", problem("ex3_family.json"))[0] == 1


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "riccati_disc", "estimate", problem("ex0.json"),
                        "--order", "1"], capture_output=True, text=True,
                       env={**os.environ, "PYTHONIOENCODING": "utf-8"})
    assert r.returncode == 0 and "TwoHyperbolic" in r.stdout
