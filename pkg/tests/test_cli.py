import json
import subprocess
import sys

import numpy as np
import pytest

from maskfit import cli, formats
from maskfit.nurbs import boundary_curve

OUTPUTS = [
    cli.TRANSFORM, cli.REGISTERED, cli.REG_LOG, cli.DISPLACEMENT, cli.WARPED, cli.INTERFACE,
    cli.INTERFACE_MESH, cli.GENERIC_MESH, cli.PRESSURE_P, cli.PRESSURE_G, cli.COMPARISON,
]


@pytest.fixture(scope="session")
def pipeline_out(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    assert cli.main(["-q", "pipeline", "--out", str(out)]) == 0
    return out


def test_pipeline_outputs(pipeline_out):
    for name in OUTPUTS:
        assert (pipeline_out / name).stat().st_size > 0, name
    doc = json.loads((pipeline_out / cli.COMPARISON).read_text())
    assert doc["no_contact"] is False and doc["success"] and doc["ratio"] < 1
    log = (pipeline_out / cli.REG_LOG).read_text().splitlines()
    assert 2 <= len(log) <= 31


def test_pipeline_is_deterministic(pipeline_out, tmp_path):
    assert cli.main(["-q", "pipeline", "--out", str(tmp_path)]) == 0
    for name in OUTPUTS:
        assert (tmp_path / name).read_bytes() == (pipeline_out / name).read_bytes(), name


def test_staged_run_matches_pipeline(pipeline_out, tmp_path):
    for stage in ("align", "register", "transfer", "design", "evaluate"):
        assert cli.main(["-q", stage, "--out", str(tmp_path)]) == 0, stage
    for name in OUTPUTS:
        assert (tmp_path / name).read_bytes() == (pipeline_out / name).read_bytes(), name


def test_fitted_boundary_follows_warped_region(pipeline_out):
    surf, cmap = formats.read_nurbs(pipeline_out / cli.INTERFACE)
    warped = formats.read_warped(pipeline_out / cli.WARPED).points
    bundle = formats.read_bundle(cli.ASSETS_DIR)
    ring = warped[: bundle.region.rings[0]]
    curve = boundary_curve(surf, samples=4000, side="v0")
    d = np.linalg.norm(ring[:, None, :] - curve[None, :, :], axis=2).min(axis=1)
    assert d.max() < 1.0


def test_missing_landmarks_exit_2(tmp_path, capsys):
    missing = tmp_path / "nope.json"
    assert cli.main(["pipeline", "--out", str(tmp_path), "--landmarks", str(missing)]) == 2
    assert str(missing) in capsys.readouterr().err


def test_bad_scan_extension_exit_2(tmp_path):
    bad = tmp_path / "scan.xyz"
    bad.write_text("0 0 0\n")
    assert cli.main(["-q", "align", "--out", str(tmp_path), "--scan", str(bad)]) == 2


def test_zero_iterations_exit_4(tmp_path):
    assert cli.main(["-q", "align", "--out", str(tmp_path)]) == 0
    assert cli.main(["-q", "register", "--out", str(tmp_path), "--max-iters", "0"]) == 4


def test_evaluate_on_registered_face(pipeline_out, tmp_path):
    args = ["-q", "evaluate", "--out", str(tmp_path)]
    for flag, name in (("--registered", cli.REGISTERED), ("--warped", cli.WARPED),
                       ("--interface-mesh", cli.INTERFACE_MESH), ("--generic-mesh", cli.GENERIC_MESH)):
        args += [flag, str(pipeline_out / name)]
    assert cli.main(args + ["--face", "registered"]) == 0
    doc = json.loads((tmp_path / cli.COMPARISON).read_text())
    assert doc["cv_personalized"] >= 0


def test_evaluate_no_contact(pipeline_out, tmp_path):
    far = formats.read_mesh(pipeline_out / cli.INTERFACE_MESH)
    far = far.with_vertices(far.vertices + [1000.0, 0.0, 0.0])
    formats.write_mesh(tmp_path / "far.obj", far)
    args = ["-q", "evaluate", "--out", str(tmp_path), "--interface-mesh", str(tmp_path / "far.obj")]
    for flag, name in (("--warped", cli.WARPED), ("--generic-mesh", cli.GENERIC_MESH)):
        args += [flag, str(pipeline_out / name)]
    assert cli.main(args) == 0
    doc = json.loads((tmp_path / cli.COMPARISON).read_text())
    assert doc["no_contact"] is True and doc["ratio"] is None
    pressures, summary = formats.read_pressure_report(tmp_path / cli.PRESSURE_P)
    assert not pressures.any() and summary["no_contact"] == "True"


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "maskfit", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("maskfit ")
