import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from frac_neumann.cli import CSV_COLUMNS, _fmt, main
from frac_neumann.discretization import parse_profile
from frac_neumann.nonlinear import parse_solver_result

BASE = """
[problem]
n = 1
s = {s}
{q_line}
{d_line}

[mesh]
n_interior = 60
n_exterior = 20
R_ext = 8
grading = 2

[tolerances]
residual = 1e-9
quadrature = 1e-8
kkt = 1e-8

[solver]
method = mountain_pass

[embedding]
C = 1.0
{extra}
"""


def write_cfg(tmp_path, s=0.45, q="6", d="d_over_d_star_star = 0.5", extra="", name="c.ini"):
    q_line = f"q = {q}" if q is not None else ""
    p = tmp_path / name
    p.write_text(BASE.format(s=s, q_line=q_line, d_line=d, extra=extra))
    return str(p)


def test_version(capsys):
    with pytest.raises(SystemExit) as e:
        main(["--version"])
    assert e.value.code == 0
    out = capsys.readouterr().out
    assert out.startswith("artifact ") and "kernel normalization" in out


def test_missing_key_exit_64(tmp_path, capsys):
    cfg = write_cfg(tmp_path, q=None)
    assert main(["constants", "--config", cfg, "--out", str(tmp_path)]) == 64
    assert "[problem] q" in capsys.readouterr().err


def test_constants_invalid_exit_2(tmp_path):
    cfg = write_cfg(tmp_path, s=0.3, q="12", d="d = 1")
    assert main(["constants", "--config", cfg, "--out", str(tmp_path)]) == 2


def test_constants_files(tmp_path):
    cfg = write_cfg(tmp_path, s=0.3, q="2.4", d="d = 1")
    assert main(["constants", "--config", cfg, "--out", str(tmp_path)]) == 0
    d = json.loads((tmp_path / "constants.json").read_text())
    kv = dict(l.split("=", 1) for l in (tmp_path / "constants.txt").read_text().splitlines())
    assert float(kv["K_infty"]) == d["K_infty"]
    assert d["C_embed"] == 1.0


def test_spectrum_outputs(tmp_path):
    cfg = write_cfg(tmp_path)
    assert main(["spectrum", "--config", cfg, "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader(open(tmp_path / "spectrum.csv")))
    assert [r["name"] for r in rows] == ["lambda2_r", "lambda2_r_plus"]
    assert float(rows[0]["value"]) <= float(rows[1]["value"])
    u, meta = parse_profile((tmp_path / "phi2_r.txt").read_text())
    assert u.values.size == 80


@pytest.fixture(scope="module")
def solved(tmp_path_factory):
    d = tmp_path_factory.mktemp("solve")
    cfg = write_cfg(d)
    code = main(["solve", "--config", cfg, "--out", str(d)])
    return d, cfg, code


def test_solve_and_verify(solved):
    d, cfg, code = solved
    assert code == 0
    info = json.loads((d / "solve.json").read_text())
    assert info["classification"] == "nonconstant"
    assert info["energy"] < info["energy_of_one"]
    assert main(["verify", "--config", cfg, "--solution", str(d / "solution.txt"), "--out", str(d)]) == 0


def test_verify_rejects_corrupted(solved, tmp_path):
    d, cfg, _ = solved
    res, _ = parse_solver_result((d / "solution.txt").read_text())
    res.u.values[10] *= 1.1
    res.save(tmp_path / "bad.txt", 1, 0.45)
    assert main(["verify", "--config", cfg, "--solution", str(tmp_path / "bad.txt"),
                 "--out", str(tmp_path)]) == 1
    assert json.loads((tmp_path / "verify.json").read_text())["passed"] is False


def test_verify_bad_file(solved, tmp_path):
    _, cfg, _ = solved
    (tmp_path / "junk.txt").write_text("nothing here\n")
    assert main(["verify", "--config", cfg, "--solution", str(tmp_path / "junk.txt"),
                 "--out", str(tmp_path)]) == 64


SWEEP = "[sweep]\nd_values = 0.02, 0.1, 50\nq_values = 2.4, 2.6, 2.7\n"


def test_sweep_grid_and_thread_determinism(tmp_path, monkeypatch):
    cfg = write_cfg(tmp_path, s=0.3, q=None, d="", extra=SWEEP)
    outs = []
    for k in ("1", "3"):
        monkeypatch.setenv("FRAC_NEUMANN_THREADS", k)
        o = tmp_path / f"o{k}"
        assert main(["sweep", "--config", cfg, "--out", str(o)]) == 0
        outs.append((o / "sweep.csv").read_bytes())
    assert outs[0] == outs[1]
    rows = list(csv.DictReader(outs[0].decode().splitlines()))
    assert tuple(rows[0].keys()) == CSV_COLUMNS
    assert len(rows) == 9
    assert [float(r["d"]) for r in rows[:3]] == [0.02] * 3
    for r in rows:
        for key in ("energy", "residual", "d_star"):
            assert _fmt(float(r[key])) == r[key]


def test_bad_thread_env(tmp_path, monkeypatch):
    cfg = write_cfg(tmp_path, s=0.3, q=None, d="", extra=SWEEP)
    monkeypatch.setenv("FRAC_NEUMANN_THREADS", "many")
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path)]) == 64


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "frac_neumann.cli", "--version"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "artifact" in r.stdout
