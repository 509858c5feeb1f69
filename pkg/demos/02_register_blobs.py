"""Small 2-D registration end to end, with saved interpolation frames.

Trains on n source/target samples, deforms a held-out test sample through
every time node, and writes the frame CSVs + manifest that the renderer in
frontend/ consumes.  Takes a couple of minutes on a laptop.
"""

from pathlib import Path

from sinkreg import OptimizerConfig, LossConfig
from sinkreg.harness import RegistrationConfig, register

out = Path(__file__).resolve().parent / "output" / "register_blobs"

config = RegistrationConfig(
    source={"kind": "blobs2d", "side": "source"},
    target={"kind": "blobs2d", "side": "target"},
    loss=LossConfig("sinkhorn_divergence", epsilon=1e-2,
                    sinkhorn_tol=1e-6, sinkhorn_max_iter=200_000),
    sigma=0.175, lam=1e-8, tau=16,
    solver="shooting",
    optimizer=OptimizerConfig("lbfgs", max_iter=60),
    seed=42, n=300, m=600,
)

result, report = register(config, out_dir=out)

print(f"optimizer: {report['status']} after {report['iterations']} iterations")
print(f"train fidelity: {report['train_fidelity']:.3e}")
print(f"test fidelity:  {report['test_fidelity_initial']:.3e} -> "
      f"{report['test_fidelity_final']:.3e}")
print(f"artifacts in {out}")
print("render with: node frontend/dist/cli.js frames "
      f"--frames {out}/test_frames --target {out}/test_frames/target.csv "
      f"--out {out}/png")
