import csv
import json
import os
import shutil
import subprocess
import sys

import numpy as np
import pytest

from wasslab.cli import REFERENCE_HEADER, main

CONFIGS = os.path.join(os.path.dirname(__file__), os.pardir, "configs")


def _write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(obj if isinstance(obj, str) else json.dumps(obj, indent=2))
    return str(p)


def _read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def test_reference_csv(tmp_path):
    assert main(["reference", "--c", "1", "--m", "1", "--t-end", "0.1", "--out", str(tmp_path)]) == 0
    header, data = _read_csv(tmp_path / "reference.csv")
    assert header == REFERENCE_HEADER
    assert data[-1, 0] == pytest.approx(0.1)
    assert data[-1, 1] == pytest.approx(0.9975802888122427, abs=1e-12)


def test_reference_rejects_nonpositive_u0(tmp_path, capsys):
    assert main(["reference", "--u0", "0", "--out", str(tmp_path)]) == 2
    assert "u0" in capsys.readouterr().err


def test_reference_rejects_bad_coupling(tmp_path):
    assert main(["reference", "--c", "-3", "--out", str(tmp_path)]) == 2


def test_verify_only_model_identity(tmp_path, capsys):
    code = main(["verify", "--suite", "default", "--only", "model_identity", "--out", str(tmp_path)])
    assert code == 0
    out = capsys.readouterr().out
    assert "2 pass, 0 fail" in out
    assert sorted(os.listdir(tmp_path)) == sorted([
        "model_identity_m_1_.csv", "model_identity_m_1_.json",
        "model_identity_m_2_.csv", "model_identity_m_2_.json", "summary.txt"])


def test_verify_wrong_sign_fails(tmp_path):
    code = main(["verify", "--suite", "default", "--only", "model_residual", "--wrong-sign", "--out", str(tmp_path)])
    assert code == 1
    data = json.loads((tmp_path / "model_residual.json").read_text())
    assert data["sup_residual"] >= 0.1


def test_verify_unknown_check(tmp_path, capsys):
    assert main(["verify", "--suite", "default", "--only", "bogus", "--out", str(tmp_path)]) == 2
    assert "bogus" in capsys.readouterr().err


def test_verify_needs_one_source(tmp_path):
    assert main(["verify", "--out", str(tmp_path)]) == 2


def test_bad_config_reports_line(tmp_path, capsys):
    text = '{\n  "flow": {\n    "kind": "heat",\n    "solver": {"dt": -1, "t_end": 1}\n  }\n}\n'
    path = _write(tmp_path, "bad.json", text)
    assert main(["simulate", "--config", path, "--out", str(tmp_path / "o")]) == 2
    assert f"{path}:4:" in capsys.readouterr().err


def test_config_check_on_wrong_flow(tmp_path, capsys):
    cfg = {"flow": {"kind": "heat", "solver": {"dt": 1e-3, "t_end": 0.1}}, "checks": ["eks_geo"]}
    assert main(["verify", "--config", _write(tmp_path, "c.json", cfg), "--out", str(tmp_path)]) == 2


def test_simulate_heat_entropy_csv(tmp_path):
    cfg = {"geometry": {"dim": 1, "grid": [64], "f_coeffs": [{"k": [1], "cos": 0.3}], "m": 3},
           "flow": {"kind": "heat", "rho0": {"preset": "perturbed_uniform", "a": 0.2},
                    "solver": {"dt": 1e-3, "t_end": 0.3, "output_stride": 10}},
           "checks": ["heat_wm"]}
    out = tmp_path / "o"
    assert main(["simulate", "--config", _write(tmp_path, "h.json", cfg), "--out", str(out), "--dump-fields"]) == 0
    header, data = _read_csv(out / "entropy.csv")
    assert header[:4] == ["t", "Ent", "Fisher", "Kin"] and header[-1] == "rhs_heat_wm"
    assert data.shape[0] == 31
    fh, fields = _read_csv(out / "fields.csv")
    assert fh == ["t", "x", "rho", "phi"] and fields.shape == (31 * 64, 4)
    dh, diag = _read_csv(out / "diagnostics.csv")
    assert np.max(np.abs(diag[:, dh.index("mass")] - 1)) < 1e-12


def test_simulate_strict_truncation_exits_3(tmp_path):
    cfg = {"geometry": {"dim": 1, "grid": [64]},
           "flow": {"kind": "geodesic", "rho0": {"preset": "perturbed_uniform", "a": 0.2},
                    "phi0": {"coeffs": [{"k": [1], "cos": 1.5}]},
                    "solver": {"dt": 1e-3, "t_end": 3.0, "output_stride": 10}}}
    path = _write(tmp_path, "g.json", cfg)
    assert main(["simulate", "--config", path, "--out", str(tmp_path / "a")]) == 0
    assert main(["simulate", "--config", path, "--out", str(tmp_path / "b"), "--strict"]) == 3


def test_simulate_finite_dim(tmp_path):
    path = os.path.join(CONFIGS, "finite_dim.json")
    assert main(["simulate", "--config", path, "--out", str(tmp_path), "--gnuplot"]) == 0
    header, data = _read_csv(tmp_path / "trajectory.csv")
    assert header == ["t", "x0", "v0", "H", "V"]
    assert (tmp_path / "trajectory.gp").exists()


def test_random_trig_seed_flag(tmp_path):
    cfg = {"geometry": {"dim": 1, "grid": [32], "m": 3},
           "flow": {"kind": "heat", "rho0": {"preset": "random_trig"}, "solver": {"dt": 1e-3, "t_end": 0.05}}}
    path = _write(tmp_path, "r.json", cfg)
    assert main(["simulate", "--config", path, "--out", str(tmp_path / "a")]) == 2
    assert main(["simulate", "--config", path, "--out", str(tmp_path / "b"), "--seed", "5"]) == 0
    assert main(["simulate", "--config", path, "--out", str(tmp_path / "c"), "--seed", "5"]) == 0
    assert (tmp_path / "b" / "entropy.csv").read_text() == (tmp_path / "c" / "entropy.csv").read_text()


def test_verify_config_file(tmp_path):
    path = os.path.join(CONFIGS, "reference.json")
    assert main(["verify", "--config", path, "--out", str(tmp_path)]) == 0
    assert (tmp_path / "summary.txt").read_text().strip().endswith("2 pass, 0 fail, 0 inconclusive")


def test_console_script_installed(tmp_path):
    exe = shutil.which("wasslab")
    cmd = [exe] if exe else [sys.executable, "-m", "wasslab.cli"]
    proc = subprocess.run(cmd + ["verify", "--suite", "default", "--only", "fd_vh", "--out", str(tmp_path)],
                          capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0, proc.stderr
    assert "fd_vh" in proc.stdout
