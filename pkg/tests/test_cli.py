import csv
import json
import math

import numpy as np
import pytest

from billiard_lab.cli import StudyConfig, apply_override, main

ELLIPSE = '{"ellipse": {"center": [0, 0], "a": 2, "b": 1, "tilt": 0}}'
COS7 = '{"cos": [0, 0, 0, 0, 0, 0, 0.01]}'


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, json.loads(out)


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_override_parsing():
    d = {"curve": {"ellipse": {"a": 1}}}
    apply_override(d, "curve.ellipse.a=2.5")
    apply_override(d, "qs=[3,4]")
    apply_override(d, "name=plain")
    assert d == {"curve": {"ellipse": {"a": 2.5}}, "qs": [3, 4], "name": "plain"}
    with pytest.raises(ValueError):
        apply_override(d, "novalue")


def test_config_validation():
    with pytest.raises(ValueError):
        StudyConfig(qs=[]).validate()
    with pytest.raises(ValueError):
        StudyConfig(tol=0.0).validate()
    with pytest.raises(ValueError):
        StudyConfig(qs=[2]).validate()
    with pytest.raises(ValueError):
        StudyConfig.from_dict({"bogus": 1})


def test_phase_portrait_circle(tmp_path, capsys):
    code, summary = run(capsys, "phase-portrait", "--out", str(tmp_path))
    assert code == 0 and summary["rows"] == 4000
    rows = read_csv(tmp_path / "phase_portrait.csv")
    assert list(rows[0]) == ["orbit", "step", "t", "t_next", "lift", "twist_density", "rotation_number"]
    assert len(rows) == 4000
    assert all(float(r["twist_density"]) > 0 for r in rows)


def test_phase_portrait_ellipse_rotation_constant(tmp_path, capsys):
    code, _ = run(capsys, "phase-portrait", "--out", str(tmp_path), "--set", f"curve={ELLIPSE}", "--set", "n_points=5", "--set", "n_steps=60")
    assert code == 0
    rows = read_csv(tmp_path / "phase_portrait.csv")
    for i in range(5):
        rho = [float(r["rotation_number"]) for r in rows if r["orbit"] == str(i)]
        assert max(rho) - min(rho) <= 1e-9


def test_phase_portrait_perturbed(tmp_path, capsys):
    code, summary = run(capsys, "phase-portrait", "--out", str(tmp_path), "--set", 'curve.deformation={"cos": [0, 0, 0.02]}', "--set", "n_steps=20")
    assert code == 0 and (tmp_path / "phase_portrait.csv").exists()


def test_orbit_command(tmp_path, capsys):
    code, summary = run(capsys, "orbit", "--out", str(tmp_path), "--set", "qs=[3,4]")
    assert code == 0
    assert [o["q"] for o in summary["orbits"]] == [3, 4]
    assert summary["orbits"][1]["action"] == pytest.approx(4.0)
    assert len(read_csv(tmp_path / "orbits.csv")) == 7


def test_verify_action_quadratic(tmp_path, capsys):
    code, summary = run(capsys, "verify", "action-quadratic", "--out", str(tmp_path))
    assert code == 0 and summary["passed"]
    assert all(1.8 <= r["slope"] <= 2.2 for r in summary["reports"])
    assert (tmp_path / "verify_action-quadratic.json").exists()


def test_verify_witness_ellipse(tmp_path, capsys):
    code, summary = run(capsys, "verify", "witness", "--out", str(tmp_path), "--set", f"curve={ELLIPSE}", "--set", "qs=[3,4,5,6,7,8,9,10]", "--set", "grid_size=16")
    assert code == 0 and len(summary["reports"]) == 8


def test_verify_witness_fails_on_cos7(tmp_path, capsys):
    code, summary = run(capsys, "verify", "witness", "--out", str(tmp_path), "--set", f"curve.deformation={COS7}", "--set", "qs=[3]")
    assert code == 1 and not summary["passed"]
    assert summary["reports"][0]["max_closing"] > 1e-6


def test_verify_symmdiff(tmp_path, capsys):
    code, summary = run(capsys, "verify", "symmdiff", "--out", str(tmp_path))
    assert code == 0
    assert summary["reports"][0]["value"] == pytest.approx(0.21 * math.pi, abs=1e-10)


def test_verify_assertion_failure_exit_code(tmp_path, capsys):
    code, summary = run(capsys, "verify", "suppression", "--out", str(tmp_path), "--set", "windows.c1_norm=[3,4]")
    assert code == 1 and not summary["passed"]


def test_solver_failure_exit_code(tmp_path, capsys):
    code, summary = run(capsys, "orbit", "--out", str(tmp_path), "--set", 'curve.deformation={"cos": [0, 0, 0.5]}')
    assert code == 2 and summary["error"] == "GeometryError"


def test_bad_config_exit_code(tmp_path, capsys):
    assert main(["orbit", "--out", str(tmp_path), "--set", "nonsense=1"]) == 2


def test_fit_rotated_ellipse(tmp_path, capsys):
    curve = '{"ellipse": {"center": [0.01, 0], "a": 1.02, "b": 0.99, "tilt": 0.7}}'
    base = '{"center": [0, 0], "a": 1, "b": 1, "tilt": 0}'
    code, summary = run(capsys, "fit", "--out", str(tmp_path), "--set", f"curve={curve}", "--set", f"base={base}")
    assert code == 0 and summary["verdict"] == "ellipse"
    rows = read_csv(tmp_path / "fit_trace.csv")
    assert float(rows[-1]["c1_norm"]) <= 1e-8


def test_fit_non_elliptic(tmp_path, capsys):
    code, summary = run(capsys, "fit", "--out", str(tmp_path), "--set", f"curve.deformation={COS7}")
    assert code == 0 and summary["verdict"] == "non-elliptic remainder"
    assert summary["final_c1_norm"] >= 5e-3


def test_fit_on_base(tmp_path, capsys):
    code, summary = run(capsys, "fit", "--out", str(tmp_path), "--set", f"curve={ELLIPSE}")
    assert summary["verdict"] == "ellipse" and summary["steps"] == 0


def test_config_file_and_determinism(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"samples": 10, "seed": 3}))
    a, b = tmp_path / "a", tmp_path / "b"
    run(capsys, "verify", "symmdiff", "--config", str(cfg), "--out", str(a))
    run(capsys, "verify", "symmdiff", "--config", str(cfg), "--out", str(b))
    for name in ("verify_symmdiff.json", "verify_symmdiff.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert len(read_csv(a / "verify_symmdiff.csv")) == 10


def test_selftest(capsys):
    code = main(["selftest", "--out", "unused"])
    assert code == 0
