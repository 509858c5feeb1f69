"""Acceptance gate: one test per criterion, each printing a PASS line.

Runtime-capped criteria time themselves (numba compilation is warmed up
once beforehand so the caps measure the algorithms, not the JIT).  The 3-D
protocol is marked slow; run it with `pytest -m slow`.
"""

import time

import numpy as np
import pytest

import sinkreg
from sinkreg import geometry
from sinkreg.harness import (RateConfig, RegistrationConfig, radius_of_gyration,
                             rate_study, register, roundtrip_error)
from sinkreg.kernels import KernelConfig
from sinkreg.lddmm import (energy_gdm, energy_shooting, grad_gdm, grad_shooting,
                           kinetic_shooting, shoot, _kinetic_gdm)
from sinkreg.optim import OptimizerConfig
from sinkreg.sinkhorn import (LossConfig, brute_force_entropic_cost,
                              entropic_cost, loss_gradient_points, loss_value,
                              sinkhorn_divergence)

from oracles import directional_diff, entropic_cost_2x2_grid


def announce(name, detail=""):
    print(f"\n[ACCEPT] {name}: PASS {detail}")


@pytest.fixture(scope="module", autouse=True)
def warm_kernels():
    # compile the numba kernels outside the timed sections
    rng = np.random.default_rng(0)
    x, y = rng.random((8, 2)), rng.random((8, 2))
    sinkreg.sinkhorn_divergence(x, y, 0.5)
    sinkreg.sinkhorn_divergence(rng.random((600, 2)), rng.random((600, 2)), 0.5)
    cfg = LossConfig("sinkhorn_divergence", epsilon=0.5)
    src = geometry.PointCloud(x)
    grad_gdm(np.zeros((3, 8, 2)), src, geometry.PointCloud(y), 0.1,
             KernelConfig(0.5), cfg, 2)
    grad_shooting(np.zeros((8, 2)), src, geometry.PointCloud(y), 0.1,
                  KernelConfig(0.5), cfg, 2)


def test_debiasing_identity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(11)
    eps_grid = (1.0, 1e-2, 1e-4)
    for k in range(100):
        n = int(rng.integers(2, 65))
        m = int(rng.integers(2, 65))
        d = int(rng.choice((2, 3)))
        eps = eps_grid[k % 3]
        x = rng.random((n, d))
        y = rng.random((m, d))
        s_self = sinkhorn_divergence(x, x, eps)
        s_cross = sinkhorn_divergence(x, y, eps)
        assert abs(s_self) <= 1e-6, (k, eps, s_self)
        assert s_cross >= -1e-6, (k, eps, s_cross)
    elapsed = time.perf_counter() - t0
    assert elapsed < 60.0
    announce("debiasing identity", f"(100 pairs in {elapsed:.1f}s)")


def test_entropic_bias_detection():
    rng = np.random.default_rng(12)
    tol = 1e-6
    for _ in range(20):
        n = int(rng.integers(2, 40))
        d = int(rng.choice((2, 3)))
        x = rng.random((n, d))
        t_self = entropic_cost(x, x, 1.0, tol=tol)
        s_self = sinkhorn_divergence(x, x, 1.0, tol=tol)
        assert t_self > 10 * tol
        assert abs(s_self) <= 1e-6
    announce("entropic bias detection")


def test_oracle_equivalence():
    rng = np.random.default_rng(13)
    # fixed 2x2 uniform case against the dense-grid oracle
    x01 = np.array([[0.0], [1.0]])
    for eps in (0.05, 0.1, 0.5, 1.0, 3.0):
        grid = entropic_cost_2x2_grid(eps)
        assert abs(entropic_cost(x01, x01, eps, tol=1e-12, max_iter=10**6)
                   - grid) <= 1e-5
        assert abs(brute_force_entropic_cost(x01, x01, eps) - grid) <= 1e-5
    # random tiny instances against the mirror-descent primal oracle
    shapes = [(1, 1), (1, 2), (2, 2), (1, 3), (3, 3), (2, 4), (1, 9), (4, 2), (9, 1)]
    for k in range(50):
        n, m = shapes[k % len(shapes)]
        d = int(rng.integers(1, 4))
        eps = float(np.exp(rng.uniform(np.log(0.05), np.log(5.0))))
        x, y = rng.random((n, d)), rng.random((m, d))
        want = brute_force_entropic_cost(x, y, eps)
        got = entropic_cost(x, y, eps, tol=1e-12, max_iter=10**6)
        assert abs(got - want) <= 1e-5, (k, n, m, eps, got, want)
    announce("oracle equivalence", "(2x2 grid + 50 mirror-descent cases)")


def _loss_grid():
    return [
        LossConfig("sinkhorn_divergence", epsilon=1.0,
                   sinkhorn_tol=1e-12, sinkhorn_max_iter=10**6),
        LossConfig("sinkhorn_divergence", epsilon=0.01,
                   sinkhorn_tol=1e-12, sinkhorn_max_iter=10**6),
        LossConfig("entropic_cost", epsilon=0.1,
                   sinkhorn_tol=1e-12, sinkhorn_max_iter=10**6),
        LossConfig("mmd_sq", theta=0.4),
    ]


def test_gradient_suite():
    t0 = time.perf_counter()
    rng = np.random.default_rng(14)
    rel_cap = 1e-3
    for loss in _loss_grid():
        for inst in range(20):
            n = int(rng.integers(4, 9))
            x, y = rng.random((n, 2)), rng.random((n, 2))
            grad = loss_gradient_points(loss, x, y)
            for _ in range(5):
                v = rng.standard_normal(x.shape)
                v /= np.linalg.norm(v)
                fd = directional_diff(lambda p: loss_value(loss, p, y), x, v)
                an = float((grad * v).sum())
                assert abs(an - fd) / max(abs(fd), 1e-12) <= rel_cap

    kc = KernelConfig(0.5)
    for loss in _loss_grid():
        for inst in range(20):
            src = geometry.PointCloud(rng.random((4, 2)))
            tgt = geometry.PointCloud(rng.random((4, 2)) + 0.3)
            a = 0.3 * rng.standard_normal((5, 4, 2))
            g = grad_gdm(a, src, tgt, 0.01, kc, loss, 4)
            fun = lambda m: energy_gdm(m, src, tgt, 0.01, kc, loss, 4)
            for _ in range(5):
                v = rng.standard_normal(a.shape)
                v /= np.linalg.norm(v)
                fd = directional_diff(fun, a, v)
                an = float((g * v).sum())
                assert abs(an - fd) / max(abs(fd), 1e-12) <= rel_cap

    for loss in _loss_grid():
        for inst in range(20):
            src = geometry.PointCloud(rng.random((4, 2)))
            tgt = geometry.PointCloud(rng.random((4, 2)) + 0.3)
            a0 = 0.3 * rng.standard_normal((4, 2))
            g = grad_shooting(a0, src, tgt, 0.01, kc, loss, 4)
            fun = lambda m: energy_shooting(m, src, tgt, 0.01, kc, loss, 4)
            for _ in range(5):
                v = rng.standard_normal(a0.shape)
                v /= np.linalg.norm(v)
                fd = directional_diff(fun, a0, v)
                an = float((g * v).sum())
                assert abs(an - fd) / max(abs(fd), 1e-12) <= rel_cap
    elapsed = time.perf_counter() - t0
    assert elapsed < 300.0
    announce("gradient suite", f"(3 ops x 4 loss configs x 20 instances, {elapsed:.0f}s)")


def test_conservation():
    rng = np.random.default_rng(15)
    kc = KernelConfig(0.5)
    for _ in range(10):
        src = geometry.PointCloud(rng.random((8, 2)))
        a0 = 0.25 * rng.standard_normal((8, 2))
        e0 = kinetic_shooting(a0, src, kc)
        resid = []
        for tau in (16, 32, 64):
            b = shoot(a0, src, kc, tau)
            resid.append(abs(_kinetic_gdm(b.z, b.a, kc.sigma, tau) - e0) / e0)
        assert resid[0] > resid[1] > resid[2]
        assert resid[2] <= 0.01
    announce("energy conservation", "(residual < 1% at tau=64, decreasing 16->32->64)")


def smoke_config(loss, solver="shooting", tau=16, seed=42, max_iter=60, restarts=1):
    opt = (OptimizerConfig("lbfgs", max_iter=max_iter)
           if solver == "shooting"
           else OptimizerConfig("fixed_step_gd", step=0.5, max_iter=300))
    return RegistrationConfig(
        source={"kind": "blobs2d", "side": "source"},
        target={"kind": "blobs2d", "side": "target"},
        loss=loss, sigma=0.175, lam=1e-8, tau=tau, solver=solver,
        optimizer=opt, seed=seed, n=200, m=400, restarts=restarts,
    )


def test_flow_invertibility():
    loss = LossConfig("sinkhorn_divergence", epsilon=1e-2,
                      sinkhorn_tol=1e-6, sinkhorn_max_iter=200_000)
    cfg = smoke_config(loss, tau=64)
    result, report = register(cfg)
    assert report["test_fidelity_final"] < report["test_fidelity_initial"]
    rel = roundtrip_error(result.bundle, result.bundle.z[0])
    assert rel <= 1e-2
    announce("flow invertibility", f"(round trip {rel:.2e} of diameter at tau=64)")


@pytest.mark.slow2d
def test_protocol_2d():
    t0 = time.perf_counter()
    loss = LossConfig("sinkhorn_divergence", epsilon=1e-4, sinkhorn_tol=1e-5,
                      sinkhorn_max_iter=500_000, sinkhorn_accel=1.8)
    cfg = RegistrationConfig(
        source={"kind": "blobs2d", "side": "source"},
        target={"kind": "blobs2d", "side": "target"},
        loss=loss, sigma=0.175, lam=1e-8, tau=16, seed=0, n=1000, m=2000,
        solver="shooting",
        optimizer=OptimizerConfig("lbfgs", max_iter=70, memory=20), restarts=5,
    )
    _, report = register(cfg)
    factor = report["test_fidelity_initial"] / report["test_fidelity_final"]
    elapsed = time.perf_counter() - t0
    assert factor >= 100.0, report
    assert elapsed <= 900.0

    # shrinkage contrast at eps = 1: the biased cost contracts the cloud
    rogs = {}
    for kind in ("entropic_cost", "sinkhorn_divergence"):
        loss1 = LossConfig(kind, epsilon=1.0, sinkhorn_tol=1e-6,
                           sinkhorn_max_iter=200_000)
        cfg1 = RegistrationConfig(
            source={"kind": "blobs2d", "side": "source"},
            target={"kind": "blobs2d", "side": "target"},
            loss=loss1, sigma=0.175, lam=1e-8, tau=16, seed=0, n=1000, m=2000,
            solver="shooting", optimizer=OptimizerConfig("lbfgs", max_iter=60),
            restarts=2,
        )
        result, rep = register(cfg1)
        from sinkreg.lddmm import apply_deformation
        seeds = np.random.SeedSequence(cfg1.seed).generate_state(4)
        test_src = geometry.sample_blobs_2d(cfg1.m, "source", int(seeds[2]))
        test_tgt = geometry.sample_blobs_2d(cfg1.m, "target", int(seeds[3]))
        moved = apply_deformation(test_src.points, result.bundle, cfg1.tau)
        rogs[kind] = radius_of_gyration(moved) / radius_of_gyration(test_tgt.points)
    assert rogs["entropic_cost"] <= 0.90, rogs
    assert rogs["sinkhorn_divergence"] > 0.90, rogs
    announce("2-D protocol",
             f"(test divergence x{factor:.0f} down in {elapsed:.0f}s; "
             f"rog T={rogs['entropic_cost']:.3f} vs S={rogs['sinkhorn_divergence']:.3f})")


def test_solver_cross_consistency():
    loss = LossConfig("sinkhorn_divergence", epsilon=1e-2,
                      sinkhorn_tol=1e-6, sinkhorn_max_iter=200_000)
    fids = {}
    for solver in ("shooting", "gdm"):
        _, report = register(smoke_config(loss, solver=solver))
        fids[solver] = report["test_fidelity_final"]
    ratio = max(fids.values()) / min(fids.values())
    assert ratio <= 3.0, fids
    announce("solver cross-consistency", f"(test fidelities within x{ratio:.2f})")


@pytest.mark.slow2d
def test_rate_experiment():
    t0 = time.perf_counter()
    cfg = RateConfig(epsilon=0.5, sizes=(32, 64, 128, 256, 512, 1024),
                     replicates=20, n_ref=16384, seed=0)
    report = rate_study(cfg)
    elapsed = time.perf_counter() - t0
    assert -0.65 <= report.slope <= -0.35, report.slope
    assert elapsed <= 600.0
    announce("rate experiment",
             f"(slope {report.slope:.3f} +- {report.half_width:.3f} in {elapsed:.0f}s)")


@pytest.mark.slow
def test_protocol_3d():
    t0 = time.perf_counter()
    loss = LossConfig("sinkhorn_divergence", epsilon=1e-4, sinkhorn_tol=1e-5,
                      sinkhorn_max_iter=500_000, sinkhorn_accel=1.8)
    cfg = RegistrationConfig(
        source={"kind": "sphere"},
        target={"kind": "mesh", "path": "data/blob_mesh.ply"},
        loss=loss, sigma=0.05, lam=1e-8, tau=16, seed=0, n=5000, m=10000,
        solver="shooting",
        optimizer=OptimizerConfig("lbfgs", max_iter=40, memory=20), restarts=2,
    )
    _, report = register(cfg)
    factor = report["test_fidelity_initial"] / report["test_fidelity_final"]
    elapsed = time.perf_counter() - t0
    assert factor >= 20.0, report
    assert elapsed <= 3600.0
    announce("3-D protocol", f"(test divergence x{factor:.0f} down in {elapsed:.0f}s)")
