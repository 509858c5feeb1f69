"""Command-line interface.

Exit codes: 0 on success, 2 on configuration errors, 3 on numeric aborts.
`--config <file>` entries override the corresponding flags.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import geometry, harness
from .errors import ConfigError, NumericAbort, ParseError
from .lddmm import apply_deformation
from .sinkhorn import sinkhorn_divergence

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _registration_dict(args) -> dict:
    d = {
        "source": args.source, "target": args.target,
        "loss": {"kind": args.loss},
        "sigma": args.sigma, "lambda": args.lam, "tau": args.tau,
        "solver": args.solver,
        "optimizer": {"kind": args.optimizer, "step": args.step,
                      "max_iter": args.max_iter},
        "seed": args.seed, "n": args.n, "m": args.m,
    }
    if args.epsilon is not None:
        d["loss"]["epsilon"] = args.epsilon
    if args.theta is not None:
        d["loss"]["theta"] = args.theta
    if args.sinkhorn_tol is not None:
        d["loss"]["sinkhorn_tol"] = args.sinkhorn_tol
    if args.sinkhorn_max_iter is not None:
        d["loss"]["sinkhorn_max_iter"] = args.sinkhorn_max_iter
    if args.config:
        try:
            overrides = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        _deep_update(d, overrides)
    return d


def _deep_update(base: dict, overrides: dict):
    for key, val in overrides.items():
        if isinstance(val, dict) and isinstance(base.get(key), dict):
            _deep_update(base[key], val)
        else:
            base[key] = val


def _cmd_register(args) -> int:
    cfg = harness.config_from_dict(_registration_dict(args))
    out = Path(args.out)
    try:
        _, report = harness.register(cfg, out_dir=out)
    except NumericAbort:
        raise
    print(json.dumps(report, indent=2, default=float))
    return EXIT_OK


def _cmd_sample(args) -> int:
    spec = harness._cloud_spec(args.kind if args.kind != "blobs2d"
                               else f"blobs2d:{args.side}")
    if args.kind == "mesh":
        if not args.mesh:
            raise ConfigError("--mesh <file.ply> is required for mesh sampling")
        spec = {"kind": "mesh", "path": args.mesh}
    cloud = harness.make_cloud(spec, args.n, args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    geometry.save_point_cloud(cloud, out)
    print(f"wrote {cloud.n} x {cloud.dim} points to {out}")
    return EXIT_OK


def _cmd_rate(args) -> int:
    kw = {}
    if args.config:
        try:
            kw = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    kw.setdefault("epsilon", args.epsilon)
    kw.setdefault("replicates", args.replicates)
    kw.setdefault("n_ref", args.n_ref)
    kw.setdefault("seed", args.seed)
    if "sizes" in kw:
        kw["sizes"] = tuple(kw["sizes"])
    try:
        cfg = harness.RateConfig(**kw)
    except TypeError as exc:
        raise ConfigError(f"bad rate config: {exc}") from exc
    report = harness.rate_study(cfg)
    csv_path = harness.save_rate_report(report, args.out)
    print(f"slope = {report.slope:.4f} +- {report.half_width:.4f} "
          f"(S_ref = {report.s_ref:.6g}); report at {csv_path}")
    return EXIT_OK


def _cmd_warmstart(args) -> int:
    try:
        base = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    cfg = harness.config_from_dict(base)
    losses = harness.WARMSTART_LOSSES
    if "warmstart_losses" in base:
        losses = tuple((e["kind"], {k: v for k, v in e.items() if k != "kind"})
                       for e in base["warmstart_losses"])
    table = harness.warmstart_grid(cfg, losses, args.runs, out_dir=args.out)
    print(json.dumps(table, indent=2))
    return EXIT_OK


def _cmd_apply(args) -> int:
    bundle, manifest = geometry.load_trajectory(Path(args.run) / "trajectory")
    cloud = geometry.load_point_cloud(args.cloud)
    t = bundle.tau if args.t is None else args.t
    moved = apply_deformation(cloud.points, bundle, t)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(out, moved, fmt=geometry.CSV_FMT, delimiter=",")
    print(f"deformed {cloud.n} points to time node {t}/{bundle.tau} -> {out}")
    return EXIT_OK


def _cmd_invert_check(args) -> int:
    bundle, _ = geometry.load_trajectory(Path(args.run) / "trajectory")
    rel = harness.roundtrip_error(bundle, bundle.z[0])
    print(f"forward-then-inverse round-trip error: {rel:.3e} of cloud diameter "
          f"(tau = {bundle.tau})")
    return EXIT_OK


def _add_registration_flags(p: argparse.ArgumentParser):
    p.add_argument("--source", default="blobs2d:source")
    p.add_argument("--target", default="blobs2d:target")
    p.add_argument("--loss", default="sinkhorn_divergence",
                   choices=["sinkhorn_divergence", "entropic_cost", "mmd_sq"])
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--sinkhorn-tol", type=float, default=None, dest="sinkhorn_tol")
    p.add_argument("--sinkhorn-max-iter", type=int, default=None, dest="sinkhorn_max_iter")
    p.add_argument("--sigma", type=float, default=0.175)
    p.add_argument("--lambda", type=float, default=1e-8, dest="lam")
    p.add_argument("--tau", type=int, default=16)
    p.add_argument("--solver", default="shooting", choices=["gdm", "shooting"])
    p.add_argument("--optimizer", default="lbfgs", choices=["lbfgs", "fixed_step_gd"])
    p.add_argument("--step", type=float, default=0.1)
    p.add_argument("--max-iter", type=int, default=100, dest="max_iter")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--m", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", default=None, help="JSON config file; overrides flags")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sinkreg",
        description="Diffeomorphic registration of point-cloud measures",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("register", help="run one registration")
    _add_registration_flags(p)
    p.add_argument("--out", required=True, help="output directory for artifacts")
    p.set_defaults(fn=_cmd_register)

    p = sub.add_parser("sample", help="materialize a dataset to CSV")
    p.add_argument("--kind", default="blobs2d", choices=["blobs2d", "sphere", "mesh"])
    p.add_argument("--side", default="source", choices=["source", "target"])
    p.add_argument("--mesh", default=None, help="PLY file for mesh sampling")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_sample)

    p = sub.add_parser("rate", help="statistical-rate study")
    p.add_argument("--epsilon", type=float, default=0.5)
    p.add_argument("--replicates", type=int, default=20)
    p.add_argument("--n-ref", type=int, default=100_000, dest="n_ref")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_rate)

    p = sub.add_parser("warmstart", help="warm-start stability grid")
    p.add_argument("--config", required=True, help="base registration config JSON")
    p.add_argument("--runs", required=True, help="directory of prior runs")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_warmstart)

    p = sub.add_parser("apply", help="deform a cloud with a saved trajectory")
    p.add_argument("--run", required=True)
    p.add_argument("--cloud", required=True)
    p.add_argument("--t", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_apply)

    p = sub.add_parser("invert-check", help="round-trip inversion diagnostic")
    p.add_argument("--run", required=True)
    p.set_defaults(fn=_cmd_invert_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, ParseError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericAbort as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
