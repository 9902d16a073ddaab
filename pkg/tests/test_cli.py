import csv
import json
import shutil

import numpy as np
import pytest

from steklov.cli import main
from steklov.freeze import disk_entry

from conftest import DATA

CONFIGS = DATA / "configs"


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return p


def test_help_lists_flags(capsys):
    with pytest.raises(SystemExit) as ei:
        main(["--help"])
    assert ei.value.code == 0
    out = capsys.readouterr().out
    for flag in ("--config", "--out", "--seed", "--jobs", "--tol-newton", "--tol-orth"):
        assert flag in out


def test_spectrum_disk(tmp_path, frozen):
    assert main(["spectrum", "--config", str(CONFIGS / "spectrum_disk.json"), "--out", str(tmp_path)]) == 0
    rows = _read_csv(tmp_path / "spectrum.csv")
    assert list(rows[0]) == ["index", "mu", "residual", "cluster_id"]
    mu0 = disk_entry(frozen, 1.0, 1.0)[0]
    assert abs(float(rows[0]["mu"]) - mu0) / mu0 <= 0.01
    assert [r["cluster_id"] for r in rows[:5]] == ["1", "2", "2", "3", "3"]
    rep = json.loads((tmp_path / "structure_report.json").read_text())
    assert rep["structure"]["ok"] and rep["first_eigenfunction"]["one_signed"]
    conv = _read_csv(tmp_path / "convergence.csv")
    assert len(conv) == 3 * 8
    last = [r for r in conv if r["h"].startswith("0.025")]
    assert all(float(r["error_ratio"]) >= 3.0 for r in last[:5])
    basis = _read_csv(tmp_path / "basis.csv")
    assert list(basis[0])[:4] == ["vertex", "x", "y", "phi_1"]


def test_spectrum_deterministic_and_jobs(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    cfg = str(CONFIGS / "spectrum_disk.json")
    assert main(["spectrum", "--config", cfg, "--out", str(a), "--seed", "7"]) == 0
    assert main(["spectrum", "--config", cfg, "--out", str(b), "--seed", "7", "--jobs", "2"]) == 0
    for name in ("spectrum.csv", "basis.csv", "structure_report.json", "convergence.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_inductive_solver_config(tmp_path):
    cfg = _write(tmp_path, "p.json", {"mesh": {"generator": "square", "side": 1.0, "h": 0.1}, "count": 5,
                                      "solver": "inductive"})
    assert main(["spectrum", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0


@pytest.mark.parametrize("content", ['{"mesh": {"generator": "disk"', '[1, 2]',
                                     '{"mesh": {"generator": "hexagon"}}',
                                     '{"mesh": {"generator": "disk", "h": -1}}',
                                     '{"mesh": {"generator": "disk"}, "weight": {"constant": -1}}',
                                     '{"mesh": {"generator": "disk"}, "tolerances": {"bogus": 1}}'])
def test_bad_config_exit_2(tmp_path, content, capsys):
    p = tmp_path / "bad.json"
    p.write_text(content)
    assert main(["spectrum", "--config", str(p), "--out", str(tmp_path / "o")]) == 2
    assert "error:" in capsys.readouterr().err


def test_missing_config_exit_2(tmp_path):
    assert main(["spectrum", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 2
    assert main(["spectrum", "--out", str(tmp_path)]) == 2


def test_resonance_ex1(tmp_path):
    assert main(["resonance", "--config", str(CONFIGS / "ex1.json"), "--out", str(tmp_path)]) == 0
    hyp = json.loads((tmp_path / "hypotheses.json").read_text())
    assert hyp["ok"] and hyp["diagnostics"]["delta_dense"] > 0
    ver = json.loads((tmp_path / "verification.json").read_text())
    assert ver["boundary_residual"] <= 1e-8 and ver["interior_residual"] <= 1e-8
    assert ver["picard"]["agrees"] and ver["bound_violations"] == 0
    trace = _read_csv(tmp_path / "homotopy_trace.csv")
    assert float(trace[0]["lambda"]) == 0.0 and float(trace[-1]["lambda"]) == 1.0
    sol = _read_csv(tmp_path / "solution.csv")
    assert list(sol[0]) == ["vertex", "x", "y", "u"]


@pytest.mark.parametrize("name,eq", [("violate_01", "01"), ("violate_02", "02"), ("violate_03", "03"),
                                     ("violate_04", "04")])
def test_resonance_hypothesis_gate(tmp_path, capsys, name, eq):
    assert main(["resonance", "--config", str(CONFIGS / f"{name}.json"), "--out", str(tmp_path)]) == 3
    err = capsys.readouterr().err
    assert f" {eq} (" in err
    hyp = json.loads((tmp_path / "hypotheses.json").read_text())
    assert eq in hyp["failed"]
    assert not (tmp_path / "homotopy_trace.csv").exists()


def test_resonance_projection_enables_solve(tmp_path):
    cfg = json.loads((CONFIGS / "violate_04.json").read_text())
    cfg["project_h"] = True
    p = _write(tmp_path, "p.json", cfg)
    assert main(["resonance", "--config", str(p), "--out", str(tmp_path / "o")]) == 0
    hyp = json.loads((tmp_path / "o" / "hypotheses.json").read_text())
    assert hyp["h_removed"] == pytest.approx(0.1, rel=1e-10)


def test_resonance_nonconvergence_exit_4(tmp_path):
    cfg = json.loads((CONFIGS / "ex1.json").read_text())
    cfg["mesh"]["h"] = 0.1
    cfg["tolerances"] = {"newton_max_iter": 1, "dlambda_min": 0.02}
    p = _write(tmp_path, "p.json", cfg)
    assert main(["resonance", "--config", str(p), "--out", str(tmp_path / "o")]) == 4
    assert (tmp_path / "o" / "homotopy_trace.csv").exists()


def test_tolerance_flag_override(tmp_path):
    cfg = json.loads((CONFIGS / "ex1.json").read_text())
    cfg["mesh"]["h"] = 0.1
    p = _write(tmp_path, "p.json", cfg)
    assert main(["resonance", "--config", str(p), "--out", str(tmp_path / "o"), "--tol-newton-max-iter", "1",
                 "--tol-dlambda-min", "0.02"]) == 4


def test_verify_disk(tmp_path):
    assert main(["verify", "--config", str(CONFIGS / "verify_disk.json"), "--out", str(tmp_path)]) == 0
    inv = json.loads((tmp_path / "invariants.json").read_text())
    assert inv["ok"] and inv["measured"]["delta_dense"] > 0 and inv["measured"]["eta_hat"] > 0


def test_verify_corrupted_basis(tmp_path, capsys):
    sp = tmp_path / "sp"
    cfg = json.loads((CONFIGS / "verify_disk.json").read_text())
    p = _write(tmp_path, "p.json", cfg)
    assert main(["spectrum", "--config", str(p), "--out", str(sp)]) == 0
    cfg["basis_file"] = str(sp / "basis.csv")
    good = _write(tmp_path, "good.json", cfg)
    assert main(["verify", "--config", str(good), "--out", str(tmp_path / "v1")]) == 0
    rows = list(csv.reader(open(sp / "basis.csv")))
    for r in rows[1:]:
        r[4] = repr(1.05 * float(r[4]))  # scale phi_2
    with open(tmp_path / "bad.csv", "w", newline="") as fh:
        csv.writer(fh).writerows(rows)
    cfg["basis_file"] = str(tmp_path / "bad.csv")
    bad = _write(tmp_path, "bad.json", cfg)
    capsys.readouterr()
    assert main(["verify", "--config", str(bad), "--out", str(tmp_path / "v2")]) == 3
    assert "boundary_orthonormal" in capsys.readouterr().err
    inv = json.loads((tmp_path / "v2" / "invariants.json").read_text())
    assert "boundary_orthonormal" in inv["failed"]


def test_verify_missing_basis_exit_2(tmp_path):
    cfg = json.loads((CONFIGS / "verify_disk.json").read_text())
    cfg["basis_file"] = str(tmp_path / "missing.csv")
    p = _write(tmp_path, "p.json", cfg)
    assert main(["verify", "--config", str(p), "--out", str(tmp_path / "o")]) == 2


def test_oracle_freeze_matches_committed(tmp_path, frozen):
    assert main(["oracle-freeze", "--out", str(tmp_path)]) == 0
    fresh = json.loads((tmp_path / "oracle_freeze.json").read_text())
    assert fresh["bessel"] == frozen["bessel"]
    assert fresh["disk_spectra"] == frozen["disk_spectra"]


def test_mesh_file_config(tmp_path):
    from steklov.mesh import generate_disk_mesh, write_mesh
    write_mesh(generate_disk_mesh(1.0, 0.1), tmp_path / "d.msh")
    cfg = _write(tmp_path, "p.json", {"mesh": {"file": "d.msh"}, "count": 4})
    assert main(["spectrum", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0


def test_h_from_csv(tmp_path):
    cfg = json.loads((CONFIGS / "ex1.json").read_text())
    cfg["mesh"]["h"] = 0.1
    sp = tmp_path / "sp"
    assert main(["spectrum", "--config", str(_write(tmp_path, "s.json", cfg)), "--out", str(sp)]) == 0
    rows = _read_csv(sp / "basis.csv")
    with open(tmp_path / "h.csv", "w") as fh:
        fh.write("vertex,value\n")
        for r in rows:
            fh.write(f"{r['vertex']},{0.1 * float(r['phi_2'])!r}\n")
    cfg["h"] = {"csv": "h.csv"}
    p = _write(tmp_path, "p.json", cfg)
    assert main(["resonance", "--config", str(p), "--out", str(tmp_path / "o")]) == 0
