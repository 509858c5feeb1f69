"""Experiment harness: registration runs, warm-start grids, rate studies.

Configurations are plain JSON dictionaries (schema in the README); every
run is a pure function of its config, so identical configs and seeds give
identical artifacts apart from wall-clock entries.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import geometry
from .errors import ConfigError, NumericAbort
from .geometry import PointCloud, load_point_cloud, load_mesh_ply, save_frames
from .kernels import KernelConfig
from .lddmm import (RegistrationResult, TrajectoryBundle, apply_deformation,
                    integrate_trajectories, invert_deformation, shoot,
                    _gdm_pullback, _shooting_pullback, _kinetic_gdm,
                    kinetic_shooting)
from .optim import OptimizerConfig, MinimizeResult, minimize
from .sinkhorn import LossConfig, LossEvaluator, loss_value, sinkhorn_divergence


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RegistrationConfig:
    source: dict
    target: dict
    loss: LossConfig
    sigma: float
    lam: float
    tau: int
    solver: str = "shooting"  # {"gdm", "shooting"}
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    seed: int = 0
    n: int = 1000
    m: int = 2000
    restarts: int = 1  # L-BFGS memory resets; each restart re-enters minimize
    test_source: dict | None = None
    test_target: dict | None = None

    def __post_init__(self):
        if self.solver not in ("gdm", "shooting"):
            raise ConfigError(f"solver must be 'gdm' or 'shooting', got {self.solver!r}")
        for name, val in (("sigma", self.sigma), ("tau", self.tau), ("n", self.n),
                          ("m", self.m), ("restarts", self.restarts)):
            if not val > 0:
                raise ConfigError(f"{name} must be positive, got {val}")
        if self.lam < 0:
            raise ConfigError("lambda must be non-negative")


def _loss_from_dict(d: dict) -> LossConfig:
    try:
        return LossConfig(
            kind=d["kind"],
            epsilon=d.get("epsilon"),
            theta=d.get("theta"),
            sinkhorn_tol=d.get("sinkhorn_tol", 1e-6),
            sinkhorn_max_iter=int(d.get("sinkhorn_max_iter", 10_000)),
            sinkhorn_accel=float(d.get("sinkhorn_accel", 1.0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad loss config {d!r}: {exc}") from exc


def _optimizer_from_dict(d: dict) -> OptimizerConfig:
    try:
        return OptimizerConfig(
            kind=d.get("kind", "lbfgs"),
            step=float(d.get("step", 0.1)),
            max_iter=int(d.get("max_iter", 100)),
            memory=int(d.get("memory", 10)),
            grad_tol=float(d.get("grad_tol", 1e-12)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad optimizer config {d!r}: {exc}") from exc


def config_from_dict(d: dict) -> RegistrationConfig:
    try:
        cfg = RegistrationConfig(
            source=_cloud_spec(d["source"]),
            target=_cloud_spec(d["target"]),
            loss=_loss_from_dict(d["loss"]),
            sigma=float(d["sigma"]),
            lam=float(d.get("lambda", d.get("lam", 0.0))),
            tau=int(d["tau"]),
            solver=d.get("solver", "shooting"),
            optimizer=_optimizer_from_dict(d.get("optimizer", {})),
            seed=int(d.get("seed", 0)),
            n=int(d.get("n", 1000)),
            m=int(d.get("m", 2000)),
            restarts=int(d.get("restarts", 1)),
            test_source=_cloud_spec(d["test_source"]) if d.get("test_source") else None,
            test_target=_cloud_spec(d["test_target"]) if d.get("test_target") else None,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad registration config: {exc}") from exc
    return cfg


def config_to_dict(cfg: RegistrationConfig) -> dict:
    loss = {"kind": cfg.loss.kind, "sinkhorn_tol": cfg.loss.sinkhorn_tol,
            "sinkhorn_max_iter": cfg.loss.sinkhorn_max_iter,
            "sinkhorn_accel": cfg.loss.sinkhorn_accel}
    if cfg.loss.epsilon is not None:
        loss["epsilon"] = cfg.loss.epsilon
    if cfg.loss.theta is not None:
        loss["theta"] = cfg.loss.theta
    return {
        "source": cfg.source, "target": cfg.target, "loss": loss,
        "sigma": cfg.sigma, "lambda": cfg.lam, "tau": cfg.tau,
        "solver": cfg.solver,
        "optimizer": {"kind": cfg.optimizer.kind, "step": cfg.optimizer.step,
                      "max_iter": cfg.optimizer.max_iter,
                      "memory": cfg.optimizer.memory,
                      "grad_tol": cfg.optimizer.grad_tol},
        "seed": cfg.seed, "n": cfg.n, "m": cfg.m, "restarts": cfg.restarts,
        "test_source": cfg.test_source, "test_target": cfg.test_target,
    }


def _cloud_spec(spec) -> dict:
    if isinstance(spec, str):
        # shorthand: "blobs2d:source", "sphere", "mesh:<path>", or a file path
        parts = spec.split(":", 1)
        kind = parts[0]
        if kind == "blobs2d":
            return {"kind": "blobs2d", "side": parts[1] if len(parts) > 1 else "source"}
        if kind == "sphere":
            return {"kind": "sphere"}
        if kind == "mesh":
            if len(parts) < 2:
                raise ConfigError("mesh spec needs a path: 'mesh:<file.ply>'")
            return {"kind": "mesh", "path": parts[1]}
        return {"kind": "file", "path": spec}
    if isinstance(spec, dict) and "kind" in spec:
        return dict(spec)
    raise ConfigError(f"cannot interpret cloud spec {spec!r}")


def make_cloud(spec: dict, n: int, seed: int) -> PointCloud:
    """Materialize a cloud spec; generators are deterministic given seed."""
    kind = spec.get("kind")
    if kind == "blobs2d":
        return geometry.sample_blobs_2d(n, spec.get("side", "source"), seed)
    if kind == "sphere":
        return geometry.sample_sphere(n, seed)
    if kind == "mesh":
        path = Path(spec["path"])
        if not path.exists():
            raise ConfigError(f"mesh file not found: {path}")
        mesh = load_mesh_ply(path)
        cloud = geometry.sample_mesh_surface(mesh, n, seed)
        cloud, _ = geometry.normalize(cloud)
        return cloud
    if kind == "file":
        path = Path(spec["path"])
        if not path.exists():
            raise ConfigError(f"cloud file not found: {path}")
        return load_point_cloud(path)
    raise ConfigError(f"unknown cloud spec kind {kind!r}")


def _child_seeds(seed: int, count: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(count)]


# ---------------------------------------------------------------------------
# Registration
# ---------------------------------------------------------------------------


def register(cfg: RegistrationConfig, out_dir=None, a0_init: np.ndarray | None = None):
    """Run one registration; returns (RegistrationResult, report dict).

    Trains on the n-sample clouds, then applies the learned deformation to
    held-out m-sample clouds at every time index.  When out_dir is given the
    trajectory, the test frames and a manifest are written there (the
    partial trace is still saved if the solver aborts on NaN).
    """
    t_start = time.perf_counter()
    seeds = _child_seeds(cfg.seed, 4)
    source = make_cloud(cfg.source, cfg.n, seeds[0])
    target = make_cloud(cfg.target, cfg.n, seeds[1])
    test_source = make_cloud(cfg.test_source or cfg.source, cfg.m, seeds[2])
    test_target = make_cloud(cfg.test_target or cfg.target, cfg.m, seeds[3])
    if source.dim != target.dim:
        raise ConfigError("source and target dimensions differ")

    kcfg = KernelConfig(cfg.sigma)
    evaluator = LossEvaluator(cfg.loss, target)
    n, d = source.n, source.dim
    h_kin = cfg.lam

    if cfg.solver == "shooting":
        shape = (n, d)

        def fun(x):
            a0 = x.reshape(shape)
            bundle = shoot(a0, source, kcfg, cfg.tau)
            fid, fgrad = evaluator.value_and_grad(bundle.z[cfg.tau])
            kin = kinetic_shooting(a0, source, kcfg)
            grad = _shooting_pullback(bundle.z, bundle.a, fgrad, cfg.sigma, cfg.tau)
            grad += (2.0 * h_kin) * _velocity_at(source.points, a0, cfg.sigma)
            return fid + h_kin * kin, grad.ravel()

    else:
        shape = (cfg.tau + 1, n, d)

        def fun(x):
            a = x.reshape(shape)
            bundle = integrate_trajectories(a, source, kcfg, cfg.tau)
            fid, fgrad = evaluator.value_and_grad(bundle.z[cfg.tau])
            kin = _kinetic_gdm(bundle.z, bundle.a, cfg.sigma, cfg.tau)
            grad = _gdm_pullback(bundle.z, bundle.a, fgrad, h_kin, cfg.sigma, cfg.tau)
            return fid + h_kin * kin, grad.ravel()

    if a0_init is None:
        x0 = np.zeros(shape).ravel()
    else:
        a0_init = np.asarray(a0_init, dtype=np.float64)
        if a0_init.shape != shape:
            raise ConfigError(f"initial momentum must have shape {shape}")
        x0 = a0_init.ravel().copy()

    abort: NumericAbort | None = None
    try:
        opt = _minimize_with_restarts(fun, x0, cfg.optimizer, cfg.restarts)
    except NumericAbort as exc:
        abort = exc
        opt = MinimizeResult(x=x0, value=np.nan, trace=np.asarray([np.nan]),
                             status="numeric_abort", iterations=0)

    if abort is None:
        if cfg.solver == "shooting":
            a_final = opt.x.reshape(shape)
            bundle = shoot(a_final, source, kcfg, cfg.tau)
            kin = kinetic_shooting(a_final, source, kcfg)
        else:
            a_final = opt.x.reshape(shape)
            bundle = integrate_trajectories(a_final, source, kcfg, cfg.tau)
            kin = _kinetic_gdm(bundle.z, bundle.a, cfg.sigma, cfg.tau)
        fid = evaluator.value(bundle.z[cfg.tau])
    else:
        bundle = TrajectoryBundle(
            z=np.repeat(source.points[None], cfg.tau + 1, axis=0),
            a=np.zeros((cfg.tau + 1, n, d)), sigma=cfg.sigma, sources=source)
        fid, kin = float("nan"), float("nan")

    result = RegistrationResult(
        bundle=bundle, loss_trace=opt.trace, final_fidelity=fid,
        final_kinetic=kin, lam=cfg.lam, iterations=opt.iterations,
        converged=opt.status == "grad_tol", status=opt.status,
    )

    report = {
        "status": opt.status,
        "iterations": opt.iterations,
        "final_loss": None if abort else float(opt.trace[-1]),
        "train_fidelity": None if abort else float(fid),
        "train_kinetic": None if abort else float(kin),
    }

    if abort is None:
        test_initial = loss_value(cfg.loss, test_source, test_target)
        test_frames = [test_source.points]
        for t in range(1, cfg.tau + 1):
            test_frames.append(apply_deformation(test_source.points, bundle, t))
        test_final = loss_value(cfg.loss, PointCloud(test_frames[-1]), test_target)
        report["test_fidelity_initial"] = float(test_initial)
        report["test_fidelity_final"] = float(test_final)
    else:
        test_frames = None
        report["test_fidelity_initial"] = None
        report["test_fidelity_final"] = None

    report["wall_time_s"] = time.perf_counter() - t_start

    if out_dir is not None:
        _write_run(out_dir, cfg, result, report, bundle, test_frames, test_target)
    if abort is not None:
        raise abort
    return result, report


def _velocity_at(points, momenta, sigma):
    from . import _fast
    return _fast.velocity(points, points, momenta, sigma)


def _minimize_with_restarts(fun, x0, opt_cfg: OptimizerConfig, restarts: int):
    """Chain minimize() calls, resuming from the last iterate each time.

    A fresh quasi-Newton memory regularly escapes the line-search deadlocks
    these registration landscapes produce; a restart that makes no progress
    ends the chain.
    """
    result = minimize(fun, x0, opt_cfg)
    trace = list(result.trace)
    iters = result.iterations
    for _ in range(restarts - 1):
        nxt = minimize(fun, result.x, opt_cfg)
        trace.extend(nxt.trace[1:])
        iters += nxt.iterations
        improved = nxt.value < result.value
        result = nxt
        if not improved:
            break
    return MinimizeResult(x=result.x, value=result.value,
                          trace=np.asarray(trace), status=result.status,
                          iterations=iters)


def _manifest(cfg: RegistrationConfig, report: dict) -> dict:
    d = config_to_dict(cfg)
    man = {
        "n": cfg.n, "d": None, "tau": cfg.tau, "sigma": cfg.sigma,
        "lambda": cfg.lam, "loss": d["loss"], "optimizer": d["optimizer"],
        "seed": cfg.seed, "final_loss": report.get("final_loss"),
        "wall_time_s": report.get("wall_time_s"),
        "config": d,
    }
    man.update({k: v for k, v in report.items() if k not in ("final_loss", "wall_time_s")})
    return man


def _write_run(out_dir, cfg, result, report, bundle, test_frames, test_target):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    man = _manifest(cfg, report)
    man["d"] = bundle.z.shape[2]
    geometry.save_trajectory(bundle, out_dir / "trajectory", extra=man)
    if test_frames is not None:
        man_test = dict(man)
        man_test["n"] = test_frames[0].shape[0]
        save_frames(test_frames, out_dir / "test_frames", man_test)
        geometry.save_point_cloud(test_target, out_dir / "test_frames" / "target.csv")
    (out_dir / "manifest.json").write_text(
        json.dumps(man, indent=2, sort_keys=True, default=float) + "\n")


# ---------------------------------------------------------------------------
# Statistical-rate study
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RateConfig:
    epsilon: float = 0.5
    sizes: tuple = (32, 64, 128, 256, 512, 1024)
    replicates: int = 20
    n_ref: int = 100_000
    seed: int = 0
    sinkhorn_tol: float = 1e-6
    sinkhorn_max_iter: int = 10_000

    def __post_init__(self):
        if len(self.sizes) < 4:
            raise ConfigError("rate study needs at least 4 sample sizes")
        if self.replicates < 10:
            raise ConfigError("rate study needs at least 10 replicates per size")


@dataclass
class RateReport:
    sizes: np.ndarray
    mean_errors: np.ndarray
    sems: np.ndarray
    slope: float
    half_width: float
    s_ref: float
    epsilon: float
    replicates: int


def _rate_sample(side: str, n: int, seed: int) -> PointCloud:
    # raw (unnormalized) mixture draws: i.i.d. from a fixed population
    return geometry.sample_blobs_2d(n, side, seed, normalized=False)


def rate_study(cfg: RateConfig) -> RateReport:
    """Monte-Carlo decay of |S(alpha_n, beta_n) - S_ref| against n.

    S_ref is the divergence between two large reference samples standing in
    for the population value.  Fits the slope of log mean error vs log n.
    """
    seeds = _child_seeds(cfg.seed, 2 + 2 * len(cfg.sizes) * cfg.replicates)
    ref_a = _rate_sample("source", cfg.n_ref, seeds[0])
    ref_b = _rate_sample("target", cfg.n_ref, seeds[1])
    s_ref = sinkhorn_divergence(ref_a, ref_b, cfg.epsilon,
                                cfg.sinkhorn_tol, cfg.sinkhorn_max_iter)
    errors = np.empty((len(cfg.sizes), cfg.replicates))
    k = 2
    for i, n in enumerate(cfg.sizes):
        for r in range(cfg.replicates):
            a = _rate_sample("source", n, seeds[k])
            b = _rate_sample("target", n, seeds[k + 1])
            k += 2
            s = sinkhorn_divergence(a, b, cfg.epsilon,
                                    cfg.sinkhorn_tol, cfg.sinkhorn_max_iter)
            errors[i, r] = abs(s - s_ref)
    means = errors.mean(axis=1)
    sems = errors.std(axis=1, ddof=1) / np.sqrt(cfg.replicates)
    slope, half = _loglog_slope(np.asarray(cfg.sizes, dtype=float), means, sems)
    return RateReport(
        sizes=np.asarray(cfg.sizes), mean_errors=means, sems=sems,
        slope=slope, half_width=half, s_ref=float(s_ref),
        epsilon=cfg.epsilon, replicates=cfg.replicates,
    )


def _loglog_slope(sizes, means, sems):
    """Weighted LS slope of log(mean) vs log(n) with CLT-propagated spread."""
    x = np.log(sizes)
    y = np.log(means)
    var_y = (sems / means) ** 2
    w = 1.0 / np.maximum(var_y, 1e-30)
    wx = np.sum(w * x)
    ww = np.sum(w)
    xc = x - wx / ww
    denom = np.sum(w * xc * xc)
    slope = float(np.sum(w * xc * y) / denom)
    slope_var = 1.0 / denom
    return slope, float(1.96 * np.sqrt(slope_var))


def save_rate_report(report: RateReport, out_dir) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "rate_report.csv"
    with open(csv_path, "w") as fh:
        fh.write("n,mean_abs_err,sem_abs_err\n")
        for n, m, s in zip(report.sizes, report.mean_errors, report.sems):
            fh.write(f"{int(n)},{m:.17g},{s:.17g}\n")
    meta = {
        "slope": report.slope, "half_width": report.half_width,
        "s_ref": report.s_ref, "epsilon": report.epsilon,
        "replicates": report.replicates,
    }
    (out_dir / "rate_report.json").write_text(json.dumps(meta, indent=2) + "\n")
    return csv_path


# ---------------------------------------------------------------------------
# Warm-start grid
# ---------------------------------------------------------------------------

WARMSTART_LOSSES = (
    ("sinkhorn_divergence", {"epsilon": 1e-4}),
    ("sinkhorn_divergence", {"epsilon": 1.0}),
    ("mmd_sq", {"theta": 0.1}),
    ("mmd_sq", {"theta": 0.5}),
)


def _loss_label(loss: LossConfig) -> str:
    if loss.kind == "mmd_sq":
        return f"mmd_sq(theta={loss.theta:g})"
    return f"{loss.kind}(eps={loss.epsilon:g})"


def warmstart_grid(base_cfg: RegistrationConfig, losses, runs_dir, out_dir=None):
    """Re-optimize each loss from every stored solution (warm-start table).

    runs_dir must hold one completed run per loss (as written by register
    with out_dir); rows of the table are losses, columns initializations
    (zero first), entries final objective values with growth rates versus
    the zero start.
    """
    runs_dir = Path(runs_dir)
    inits: dict[str, np.ndarray] = {}
    for loss_kind, params in losses:
        label = _loss_label(_mk_loss(base_cfg.loss, loss_kind, params))
        run = runs_dir / _slug(label)
        if not (run / "trajectory" / "manifest.json").exists():
            raise ConfigError(f"missing prior run for {label} under {runs_dir}")
        bundle, _ = geometry.load_trajectory(run / "trajectory")
        inits[label] = bundle.a[0]

    table: dict[str, dict[str, float]] = {}
    for loss_kind, params in losses:
        loss = _mk_loss(base_cfg.loss, loss_kind, params)
        row_label = _loss_label(loss)
        cfg = _with_loss(base_cfg, loss)
        row: dict[str, float] = {}
        _, rep = register(cfg)
        row["zero"] = rep["final_loss"]
        for col_label, a0 in inits.items():
            _, rep = register(cfg, a0_init=a0)
            row[col_label] = rep["final_loss"]
        table[row_label] = row

    growth = {
        row: {col: (val - vals["zero"]) / abs(vals["zero"]) if vals["zero"] else float("nan")
              for col, val in vals.items() if col != "zero"}
        for row, vals in table.items()
    }
    out = {"final_loss": table, "growth_vs_zero": growth}
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "warmstart.json").write_text(json.dumps(out, indent=2) + "\n")
        _write_warmstart_csv(out_dir / "warmstart.csv", table)
    return out


def _write_warmstart_csv(path, table):
    cols = ["zero"] + [c for c in next(iter(table.values())) if c != "zero"]
    with open(path, "w") as fh:
        fh.write("loss," + ",".join(cols) + "\n")
        for row, vals in table.items():
            fh.write(row + "," + ",".join(f"{vals[c]:.17g}" for c in cols) + "\n")


def _mk_loss(template: LossConfig, kind: str, params: dict) -> LossConfig:
    return LossConfig(kind=kind, epsilon=params.get("epsilon"),
                      theta=params.get("theta"),
                      sinkhorn_tol=template.sinkhorn_tol,
                      sinkhorn_max_iter=template.sinkhorn_max_iter)


def _with_loss(cfg: RegistrationConfig, loss: LossConfig) -> RegistrationConfig:
    d = config_to_dict(cfg)
    d["loss"] = {"kind": loss.kind, "epsilon": loss.epsilon, "theta": loss.theta,
                 "sinkhorn_tol": loss.sinkhorn_tol,
                 "sinkhorn_max_iter": loss.sinkhorn_max_iter}
    d["loss"] = {k: v for k, v in d["loss"].items() if v is not None}
    return config_from_dict(d)


def _slug(label: str) -> str:
    return label.replace("(", "_").replace(")", "").replace("=", "").replace(".", "p")


# ---------------------------------------------------------------------------
# Misc harness helpers
# ---------------------------------------------------------------------------


def radius_of_gyration(points: np.ndarray) -> float:
    pts = np.asarray(points, dtype=np.float64)
    centered = pts - pts.mean(axis=0)
    return float(np.sqrt((centered ** 2).sum(axis=1).mean()))


def roundtrip_error(bundle: TrajectoryBundle, points: np.ndarray) -> float:
    """Forward-then-inverse sup error relative to the cloud diameter."""
    fwd = apply_deformation(points, bundle, bundle.tau)
    back = invert_deformation(fwd, bundle)
    err = float(np.linalg.norm(back - points, axis=1).max())
    pts = np.asarray(points)
    diam = float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
    return err / diam
