"""Regenerate the checked-in experiment configs under configs/.

One JSON per benchmark run: every loss/parameter cell of the 2-D and 3-D
studies, the statistical-rate study, the warm-start grid and the fast smoke
instance.  Paths inside the configs are relative to the repository root.
"""

import json
import sys
from pathlib import Path

EPS_GRID_2D = [1.0, 1e-2, 1e-4, 1e-6]
THETA_GRID_2D = [1.0, 0.5, 0.1]
EPS_GRID_3D = [1.0, 1e-2, 1e-4]
THETA_GRID_3D = [1.0, 0.1, 0.5]


def sinkhorn_settings(eps):
    # small epsilon needs a deeper iteration budget and benefits from the
    # over-relaxed updates; tolerances follow the epsilon scale
    if eps >= 1e-2:
        return {"sinkhorn_tol": 1e-6, "sinkhorn_max_iter": 200_000}
    if eps >= 1e-4:
        return {"sinkhorn_tol": 1e-5, "sinkhorn_max_iter": 500_000,
                "sinkhorn_accel": 1.8}
    return {"sinkhorn_tol": 1e-6, "sinkhorn_max_iter": 5_000_000,
            "sinkhorn_accel": 1.9}


def loss_cfg(kind, **params):
    cfg = {"kind": kind, **params}
    if kind != "mmd_sq":
        cfg.update(sinkhorn_settings(params["epsilon"]))
    return cfg


def base_2d(solver):
    opt = ({"kind": "lbfgs", "max_iter": 150, "memory": 20}
           if solver == "shooting"
           else {"kind": "fixed_step_gd", "step": 0.5, "max_iter": 300})
    return {
        "source": {"kind": "blobs2d", "side": "source"},
        "target": {"kind": "blobs2d", "side": "target"},
        "n": 1000, "m": 2000,
        "sigma": 0.175, "lambda": 1e-8, "tau": 16,
        "solver": solver, "optimizer": opt, "seed": 0,
    }


def base_3d():
    return {
        "source": {"kind": "sphere"},
        "target": {"kind": "mesh", "path": "data/blob_mesh.ply"},
        "n": 5000, "m": 10000,
        "sigma": 0.05, "lambda": 1e-8, "tau": 16,
        "solver": "shooting",
        "optimizer": {"kind": "lbfgs", "max_iter": 60, "memory": 20},
        "seed": 0,
    }


def tag(value):
    return f"{value:g}".replace(".", "p").replace("-", "m")


def main(out_dir):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    configs = {}

    for solver, solver_tag in (("gdm", "gdm"), ("shooting", "gs")):
        for eps in EPS_GRID_2D:
            for kind, kind_tag in (("sinkhorn_divergence", "sink"),
                                   ("entropic_cost", "ot")):
                cfg = base_2d(solver)
                cfg["loss"] = loss_cfg(kind, epsilon=eps)
                configs[f"2d_{solver_tag}_{kind_tag}_eps{tag(eps)}"] = cfg
        for theta in THETA_GRID_2D:
            cfg = base_2d(solver)
            cfg["loss"] = loss_cfg("mmd_sq", theta=theta)
            configs[f"2d_{solver_tag}_mmd_theta{tag(theta)}"] = cfg

    for eps in EPS_GRID_3D:
        for kind, kind_tag in (("sinkhorn_divergence", "sink"),
                               ("entropic_cost", "ot")):
            cfg = base_3d()
            cfg["loss"] = loss_cfg(kind, epsilon=eps)
            configs[f"3d_gs_{kind_tag}_eps{tag(eps)}"] = cfg
    for theta in THETA_GRID_3D:
        cfg = base_3d()
        cfg["loss"] = loss_cfg("mmd_sq", theta=theta)
        configs[f"3d_gs_mmd_theta{tag(theta)}"] = cfg

    smoke = base_2d("shooting")
    smoke.update({"n": 200, "m": 400, "seed": 42})
    smoke["loss"] = loss_cfg("sinkhorn_divergence", epsilon=1e-2)
    smoke["optimizer"] = {"kind": "lbfgs", "max_iter": 60}
    configs["2d_smoke_gs_sink_eps1em2"] = smoke

    warm = base_2d("shooting")
    warm["loss"] = loss_cfg("sinkhorn_divergence", epsilon=1e-4)
    warm["warmstart_losses"] = [
        {"kind": "sinkhorn_divergence", "epsilon": 1e-4},
        {"kind": "sinkhorn_divergence", "epsilon": 1.0},
        {"kind": "mmd_sq", "theta": 0.1},
        {"kind": "mmd_sq", "theta": 0.5},
    ]
    configs["2d_warmstart_grid"] = warm

    configs["rate_sink_eps0p5"] = {
        "epsilon": 0.5, "sizes": [32, 64, 128, 256, 512, 1024],
        "replicates": 20, "n_ref": 100_000, "seed": 0,
    }

    for name, cfg in configs.items():
        (out_dir / f"{name}.json").write_text(json.dumps(cfg, indent=2) + "\n")
    print(f"wrote {len(configs)} configs to {out_dir}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else
         Path(__file__).resolve().parent.parent / "configs")
