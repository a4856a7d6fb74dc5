import hashlib
import json

import pytest

from masym.cli import main


def write_config(tmp_path, obj, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(obj, indent=1) + "\n")
    return str(path)


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


RADIAL_CFG = {"command": "solve-radial", "alpha": 1.0, "beta": 2.0, "n": 2,
              "grid_size": 512}


def test_solve_radial_artifacts(tmp_path):
    cfg = write_config(tmp_path, RADIAL_CFG)
    out = tmp_path / "out"
    assert main(["--config", cfg, "--out", str(out), "--quiet"]) == 0
    summary = read_json(out / "summary.json")
    assert summary["outcome"] == "solution"
    assert abs(summary["u1_center"] + 0.0652) < 1e-3
    manifest = read_json(out / "manifest.json")
    assert set(manifest["artifacts"]) == {"profile.csv", "summary.json"}
    for name, digest in manifest["artifacts"].items():
        data = (out / name).read_bytes()
        assert hashlib.sha256(data).hexdigest() == digest


def test_reruns_are_byte_identical(tmp_path):
    cfg = write_config(tmp_path, RADIAL_CFG)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["--config", cfg, "--out", str(a), "--quiet"]) == 0
    assert main(["--config", cfg, "--out", str(b), "--quiet"]) == 0
    for name in ("profile.csv", "summary.json", "manifest.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_no_solution_is_an_outcome_not_an_error(tmp_path):
    cfg = write_config(tmp_path, {"command": "solve-radial", "alpha": 2.0,
                                  "beta": 2.0, "n": 2, "grid_size": 512})
    out = tmp_path / "out"
    assert main(["--config", cfg, "--out", str(out), "--quiet"]) == 0
    assert read_json(out / "summary.json")["outcome"] == "no-solution"


def test_unknown_key_rejected_with_location(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{"command": "solve-radial",\n "alpha": 1.0,\n "bogus": 3}\n')
    code = main(["--config", str(path), "--out", str(tmp_path / "out")])
    assert code == 2
    err = capsys.readouterr().err
    assert "bogus" in err
    assert "bad.json:3" in err


def test_invalid_json_rejected(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text('{"command": "solve-radial",\n')
    assert main(["--config", str(path), "--out", str(tmp_path / "out")]) == 2
    assert "broken.json" in capsys.readouterr().err


def test_unknown_command_rejected(tmp_path):
    cfg = write_config(tmp_path, {"command": "frobnicate"})
    assert main(["--config", cfg, "--out", str(tmp_path / "out")]) == 2


def test_negative_parameter_rejected(tmp_path):
    cfg = write_config(tmp_path, {"command": "solve-radial", "alpha": -1.0,
                                  "beta": 2.0})
    assert main(["--config", cfg, "--out", str(tmp_path / "out")]) == 2


def test_divergence_exit_code_and_report(tmp_path, capsys):
    cfg = write_config(tmp_path, {
        "command": "solve-grid",
        "domain": {"shape": "ball", "center": [0.0, 0.0], "radius": 1.0},
        "system": {"alpha": 1.0, "beta": 1.0},
        "cs": [0.0, 0.0],
        "params": {"h": 0.0625, "max_newton": 1, "max_euler": 3},
    })
    out = tmp_path / "out"
    assert main(["--config", cfg, "--out", str(out), "--quiet"]) == 3
    report = read_json(out / "divergence.json")
    assert "error" in report
    assert not (out / ".lock").exists()


def test_certify_quadratic_fixture(tmp_path):
    cfg = write_config(tmp_path, {"command": "certify", "fixture": "quadratic",
                                  "params": {"h": 0.03125}, "n_lambdas": 6})
    out = tmp_path / "out"
    assert main(["--config", cfg, "--out", str(out), "--quiet"]) == 0
    cert = read_json(out / "certificate.json")
    assert cert["passed"]
    assert cert["total_ei_violations"] == 0


def test_hypotheses_command(tmp_path):
    cfg = write_config(tmp_path, {
        "command": "hypotheses",
        "system": {"alpha": 1.0, "beta": 2.0},
        "box": {"x": [[-1.0, 1.0], [-1.0, 1.0]],
                "z": [[-2.0, -0.1], [-2.0, -0.1]],
                "p": [[-1.0, 1.0], [-1.0, 1.0]]},
        "samples": 128,
    })
    out = tmp_path / "out"
    assert main(["--config", cfg, "--out", str(out), "--quiet"]) == 0
    rep = read_json(out / "hypotheses.json")
    assert rep["statuses"]["positivity"] == "pass"


def test_trichotomy_command(tmp_path):
    cfg = write_config(tmp_path, {"command": "sweep-trichotomy", "n": 2,
                                  "grid_size": 512,
                                  "pairs": [[1, 1], [2, 2]]})
    out = tmp_path / "out"
    assert main(["--config", cfg, "--out", str(out), "--quiet"]) == 0
    rows = read_json(out / "trichotomy.json")["rows"]
    assert [r["outcome"] for r in rows] == ["solution", "no-solution"]


def test_linearize_command(tmp_path):
    cfg = write_config(tmp_path, {
        "command": "linearize",
        "domain": {"shape": "ball", "center": [0.0, 0.0], "radius": 1.0},
        "system": {"alpha": 1.0, "beta": 1.0},
        "cs": [0.0, 0.0],
        "params": {"h": 0.03125},
        "nu": [1.0, 0.0],
        "lambda": -0.5,
    })
    out = tmp_path / "out"
    assert main(["--config", cfg, "--out", str(out), "--quiet"]) == 0
    rep = read_json(out / "linearization.json")
    assert rep["elliptic_inequality"]["total_violations"] == 0
    assert (out / "linearization.csv").exists()


def test_locked_output_directory_rejected(tmp_path):
    cfg = write_config(tmp_path, RADIAL_CFG)
    out = tmp_path / "out"
    out.mkdir()
    (out / ".lock").write_text("locked\n")
    assert main(["--config", cfg, "--out", str(out), "--quiet"]) == 2


def test_missing_config_flag_errors():
    with pytest.raises(SystemExit):
        main([])
