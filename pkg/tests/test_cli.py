import json
import subprocess
import sys

import numpy as np
import pytest

from sinkreg import geometry
from sinkreg.cli import main


def run_cli(*argv):
    return main(list(argv))


def write_tiny_config(tmp_path, **overrides):
    source = geometry.sample_blobs_2d(50, "source", seed=2)
    target = geometry.sample_blobs_2d(50, "target", seed=3)
    src_path, tgt_path = tmp_path / "src.csv", tmp_path / "tgt.csv"
    geometry.save_point_cloud(source, src_path)
    geometry.save_point_cloud(target, tgt_path)
    cfg = {
        "source": str(src_path), "target": str(tgt_path),
        "loss": {"kind": "mmd_sq", "theta": 0.3},
        "sigma": 0.25, "lambda": 1e-8, "tau": 6,
        "solver": "shooting",
        "optimizer": {"kind": "lbfgs", "max_iter": 15},
        "seed": 1, "n": 50, "m": 50,
    }
    cfg.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


def test_sample_deterministic(tmp_path):
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run_cli("sample", "--kind", "blobs2d", "--side", "target",
                   "--n", "100", "--seed", "4", "--out", str(out1)) == 0
    assert run_cli("sample", "--kind", "blobs2d", "--side", "target",
                   "--n", "100", "--seed", "4", "--out", str(out2)) == 0
    assert out1.read_bytes() == out2.read_bytes()
    cloud = geometry.load_point_cloud(out1)
    assert cloud.n == 100 and cloud.dim == 2


def test_sample_mesh_requires_file(tmp_path):
    code = run_cli("sample", "--kind", "mesh", "--mesh", str(tmp_path / "no.ply"),
                   "--n", "10", "--out", str(tmp_path / "o.csv"))
    assert code == 2


def test_register_and_apply_and_invert(tmp_path):
    cfg_path = write_tiny_config(tmp_path)
    run_dir = tmp_path / "run"
    assert run_cli("register", "--config", str(cfg_path), "--out", str(run_dir)) == 0
    manifest = json.loads((run_dir / "manifest.json").read_text())
    assert manifest["tau"] == 6
    assert manifest["final_loss"] is not None
    frames = sorted((run_dir / "test_frames").glob("frame_*.csv"))
    assert len(frames) == 7

    moved_path = tmp_path / "moved.csv"
    assert run_cli("apply", "--run", str(run_dir), "--cloud", str(tmp_path / "src.csv"),
                   "--out", str(moved_path)) == 0
    moved = geometry.load_point_cloud(moved_path)
    # the training sources replayed through the bundle land on the final frame
    bundle, _ = geometry.load_trajectory(run_dir / "trajectory")
    np.testing.assert_allclose(moved.points, bundle.z[-1], atol=1e-10)

    assert run_cli("invert-check", "--run", str(run_dir)) == 0


def test_register_config_error(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"source": "blobs2d:source"}))
    assert run_cli("register", "--config", str(bad), "--out", str(tmp_path / "o")) == 2
    missing = run_cli("register", "--config", str(tmp_path / "none.json"),
                      "--out", str(tmp_path / "o"))
    assert missing == 2


def test_register_numeric_abort(tmp_path):
    # absurd fixed step explodes the flow: exit code 3, partial trace saved
    cfg_path = write_tiny_config(
        tmp_path, optimizer={"kind": "fixed_step_gd", "step": 1e6, "max_iter": 5},
        loss={"kind": "mmd_sq", "theta": 0.3})
    run_dir = tmp_path / "boom"
    assert run_cli("register", "--config", str(cfg_path), "--out", str(run_dir)) == 3
    manifest = json.loads((run_dir / "manifest.json").read_text())
    assert manifest["final_loss"] is None


def test_rate_cli(tmp_path):
    cfg = tmp_path / "rate.json"
    cfg.write_text(json.dumps({"sizes": [16, 32, 64, 128], "replicates": 10,
                               "n_ref": 1024, "epsilon": 0.5, "seed": 7}))
    out = tmp_path / "rate"
    assert run_cli("rate", "--config", str(cfg), "--out", str(out)) == 0
    assert (out / "rate_report.csv").exists()
    meta = json.loads((out / "rate_report.json").read_text())
    assert meta["replicates"] == 10


def test_console_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "sinkreg.cli", "sample", "--kind", "sphere",
         "--n", "20", "--seed", "0", "--out", str(tmp_path / "s.csv")],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    cloud = geometry.load_point_cloud(tmp_path / "s.csv")
    assert cloud.n == 20 and cloud.dim == 3


def test_cli_warmstart(tmp_path):
    cfg_path = write_tiny_config(
        tmp_path,
        warmstart_losses=[{"kind": "mmd_sq", "theta": 0.3}],
        loss={"kind": "mmd_sq", "theta": 0.3},
    )
    # build the prior run the grid expects
    from sinkreg.harness import (_loss_label, _mk_loss, _slug, _with_loss,
                                 config_from_dict, register)
    base = config_from_dict(json.loads(cfg_path.read_text()))
    loss = _mk_loss(base.loss, "mmd_sq", {"theta": 0.3})
    register(_with_loss(base, loss),
             out_dir=tmp_path / "runs" / _slug(_loss_label(loss)))
    assert run_cli("warmstart", "--config", str(cfg_path),
                   "--runs", str(tmp_path / "runs"),
                   "--out", str(tmp_path / "wout")) == 0
    table = json.loads((tmp_path / "wout" / "warmstart.json").read_text())
    assert "mmd_sq(theta=0.3)" in table["final_loss"]
