import copy
import json
import shutil
import subprocess

import numpy as np
import pytest

from fracspde.cli import blob_id, run
from fracspde.config import config_hash

DOC = {
    "index": {"alpha": [2.0], "delta": [0.0]},
    "grid": {"half_length": 3.141592653589793, "points": 16, "allow_wrap": True},
    "measure": {"kind": "white", "amplitude": 1.0},
    "coefficients": {"b": {"family": "constant", "c": 0.0}, "sigma": {"family": "constant", "c": 1.0}},
    "time": {"T": 0.25, "n_steps": 8, "seed": 1, "save_every": 4},
}


def _write(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def _edit(path, value):
    doc = copy.deepcopy(DOC)
    node = doc
    for key in path[:-1]:
        node = node[key]
    if value is None:
        del node[path[-1]]
    else:
        node[path[-1]] = value
    return doc


def test_selftest_passes(tmp_path):
    assert run(["selftest", "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "selftest.csv").read_text().splitlines()
    assert rows[0].startswith("check") and len(rows) > 10


def test_kernel_table_header(tmp_path):
    assert run(["kernel-table", "--alpha", "2", "--t", "1", "--n-x", "3", "--x-min", "0", "--x-max", "1",
                "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "kernel.csv").read_text().splitlines()
    assert lines[0] == "alpha,delta,t,x,G" and len(lines) == 4
    assert float(lines[1].split(",")[-1]) == pytest.approx(0.2820948, abs=1e-7)


@pytest.mark.parametrize("path, value, needle", [
    (("index", "alpha"), [1.0], "alpha=1"),
    (("index", "delta"), [0.8], "delta"),
    (("time", "colour"), 1, "colour"),
    (("time", "T"), None, "'T'"),
])
def test_invalid_configs_exit_2(tmp_path, capsys, path, value, needle):
    cfg = _write(tmp_path, _edit(path, value))
    assert run(["simulate", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert needle in capsys.readouterr().err


def test_measure_violation_needs_override(tmp_path, capsys):
    doc = _edit(("index", "alpha"), [0.5])
    doc["grid"]["allow_wrap"] = True
    assert run(["simulate", "--config", _write(tmp_path, doc), "--out", str(tmp_path / "o")]) == 2
    assert "override" in capsys.readouterr().err
    doc["measure"]["override"] = True
    assert run(["simulate", "--config", _write(tmp_path, doc), "--out", str(tmp_path / "o")]) == 0


def test_bad_control_file(tmp_path, capsys):
    cfg = _write(tmp_path, DOC)
    ctrl = tmp_path / "c.csv"
    ctrl.write_text("step,mode,re,im\n0,1,1,0\n")
    assert run(["skeleton", "--config", cfg, "--control", str(ctrl), "--out", str(tmp_path / "o")]) == 2
    ctrl.write_text("step,k0,re,im\n0,1,1,0\n")   # no conjugate partner
    assert run(["skeleton", "--config", cfg, "--control", str(ctrl), "--out", str(tmp_path / "o")]) == 2
    assert "Hermitian" in capsys.readouterr().err


def test_blow_up_exit_3(tmp_path, capsys):
    doc = copy.deepcopy(DOC)
    doc["coefficients"]["b"] = {"family": "linear", "a": 1e200, "c": 1.0}
    with np.errstate(over="ignore", invalid="ignore"):
        assert run(["simulate", "--config", _write(tmp_path, doc), "--out", str(tmp_path / "o")]) == 3
    assert "numerical error" in capsys.readouterr().err


def test_seed_override(tmp_path, monkeypatch):
    cfg = _write(tmp_path, DOC)
    monkeypatch.setenv("FRACSPDE_SEED", "77")
    assert run(["simulate", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["seed"] == 77 and manifest["config"]["time"]["seed"] == 77
    # replay uses the recorded seed whatever the environment says
    monkeypatch.setenv("FRACSPDE_SEED", "5")
    assert run(["--replay", str(tmp_path / "a" / "manifest.json")]) == 0
    monkeypatch.setenv("FRACSPDE_SEED", "x")
    assert run(["simulate", "--config", cfg, "--out", str(tmp_path / "b")]) == 2


def test_manifest_contents(tmp_path):
    assert run(["simulate", "--config", _write(tmp_path, DOC), "--out", str(tmp_path)]) == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["config_sha256"] == config_hash(manifest["config"])
    data = (tmp_path / "trajectory.csv").read_bytes()
    assert manifest["outputs"] == {"trajectory.csv": blob_id(data)}
    git = shutil.which("git")
    if git:
        out = subprocess.run([git, "hash-object", str(tmp_path / "trajectory.csv")], capture_output=True, text=True)
        assert out.stdout.strip() == blob_id(data)


def test_tampered_manifest(tmp_path):
    assert run(["simulate", "--config", _write(tmp_path, DOC), "--out", str(tmp_path / "a")]) == 0
    path = tmp_path / "a" / "manifest.json"
    manifest = json.loads(path.read_text())
    manifest["outputs"]["trajectory.csv"] = "0" * 40
    path.write_text(json.dumps(manifest))
    assert run(["--replay", str(path)]) == 1
    manifest["config"]["time"]["seed"] = 2
    path.write_text(json.dumps(manifest))
    assert run(["--replay", str(path)]) == 2


def test_missing_config_file(tmp_path):
    assert run(["simulate", "--config", str(tmp_path / "nope.json")]) == 2
