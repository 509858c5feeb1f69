"""Discrete LDDMM machinery: kernel flows, energies, adjoints, deformation.

Time is discretized with explicit Euler on a uniform grid of tau steps with
left-endpoint velocities, so the flow of the training points is

    z[t+1]_i = z[t]_i + (1/tau) sum_j k(z[t]_i, z[t]_j) a[t]_j,   z[0] = x.

Gradients are exact discrete adjoints of these recursions (reverse sweeps
over the stored forward states), not discretizations of the continuous
costate equations; they match finite differences of the discrete energies
to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _fast
from .errors import NumericAbort
from .geometry import PointCloud
from .kernels import KernelConfig
from .sinkhorn import LossConfig, LossEvaluator

__all__ = [
    "TrajectoryBundle", "RegistrationResult", "integrate_trajectories",
    "energy_gdm", "grad_gdm", "shoot", "energy_shooting", "grad_shooting",
    "apply_deformation", "invert_deformation",
]


@dataclass(frozen=True)
class TrajectoryBundle:
    """Control trajectories z and momenta a on the discrete time grid.

    z, a: (tau+1, n, d); z[0] equals the source points exactly and each
    z[t+1] is the explicit-Euler image of z[t].
    """

    z: np.ndarray
    a: np.ndarray
    sigma: float
    sources: PointCloud

    @property
    def tau(self) -> int:
        return self.z.shape[0] - 1


@dataclass
class RegistrationResult:
    bundle: TrajectoryBundle
    loss_trace: np.ndarray
    final_fidelity: float
    final_kinetic: float
    lam: float
    iterations: int
    converged: bool
    status: str = ""


def _check_momentum(a, tau, n, d):
    a = np.ascontiguousarray(a, dtype=np.float64)
    if a.shape != (tau + 1, n, d):
        raise ValueError(f"momentum must have shape {(tau + 1, n, d)}, got {a.shape}")
    if not np.isfinite(a).all():
        raise ValueError("momentum contains non-finite entries")
    return a


def integrate_trajectories(a, sources: PointCloud, cfg: KernelConfig, tau: int) -> TrajectoryBundle:
    """Flow the source points through the momentum field (explicit Euler)."""
    x = sources.points
    n, d = x.shape
    a = _check_momentum(a, tau, n, d)
    z = np.empty((tau + 1, n, d))
    z[0] = x
    h = 1.0 / tau
    for t in range(tau):
        z[t + 1] = z[t] + h * _fast.velocity(z[t], z[t], a[t], cfg.sigma)
        if not np.isfinite(z[t + 1]).all():
            raise NumericAbort(f"trajectory integration produced NaN at step {t + 1}")
    return TrajectoryBundle(z=z, a=a, sigma=cfg.sigma, sources=sources)


def _kinetic_gdm(z, a, sigma, tau) -> float:
    """(1/tau) sum_t a[t] . K(z[t]) a[t] over the left-endpoint grid."""
    total = 0.0
    for t in range(tau):
        total += float(np.sum(_fast.quad_energy_rows(z[t], a[t], sigma)))
    return total / tau


def energy_gdm(a, sources: PointCloud, target: PointCloud, lam: float,
               cfg: KernelConfig, loss: LossConfig, tau: int) -> float:
    """Fidelity of the flowed cloud plus lam times the discretized kinetic energy."""
    bundle = integrate_trajectories(a, sources, cfg, tau)
    evaluator = LossEvaluator(loss, target)
    fid = evaluator.value(bundle.z[tau])
    return fid + lam * _kinetic_gdm(bundle.z, bundle.a, cfg.sigma, tau)


def _gdm_pullback(z, a, seed_w, lam, sigma, tau) -> np.ndarray:
    """Adjoint of the Euler flow for the time-dependent energy.

    seed_w is dE/dz[tau]; returns dE/da with a zero last slice (the left
    endpoint grid never reads a[tau]).
    """
    n, d = z.shape[1], z.shape[2]
    h = 1.0 / tau
    grad = np.zeros((tau + 1, n, d))
    w = seed_w.copy()
    for t in range(tau - 1, -1, -1):
        grad[t] = h * _fast.velocity(z[t], z[t], w, sigma)
        grad[t] += (2.0 * lam * h) * _fast.velocity(z[t], z[t], a[t], sigma)
        w_new = w + h * _fast.vjp_velocity_z(z[t], a[t], w, sigma)
        w_new += (2.0 * lam * h) * _fast.hamiltonian_zgrad(z[t], a[t], sigma)
        w = w_new
    return grad


def grad_gdm(a, sources: PointCloud, target: PointCloud, lam: float,
             cfg: KernelConfig, loss: LossConfig, tau: int) -> np.ndarray:
    """Exact gradient of energy_gdm with respect to the momentum tensor."""
    bundle = integrate_trajectories(a, sources, cfg, tau)
    evaluator = LossEvaluator(loss, target)
    seed = evaluator.grad(bundle.z[tau])
    return _gdm_pullback(bundle.z, bundle.a, seed, lam, cfg.sigma, tau)


def shoot(a0, sources: PointCloud, cfg: KernelConfig, tau: int) -> TrajectoryBundle:
    """Integrate the coupled Hamiltonian system from the initial momentum.

    The momentum update is a[t+1]_i = a[t]_i - (1/tau) G_i with
    G_i = sum_j (a_i . a_j) grad_1 k(z_i, z_j), i.e. minus the z-gradient of
    the half kernel quadratic form.
    """
    x = sources.points
    n, d = x.shape
    a0 = np.ascontiguousarray(a0, dtype=np.float64)
    if a0.shape != (n, d):
        raise ValueError(f"a0 must have shape {(n, d)}, got {a0.shape}")
    if not np.isfinite(a0).all():
        raise ValueError("a0 contains non-finite entries")
    z = np.empty((tau + 1, n, d))
    a = np.empty((tau + 1, n, d))
    z[0] = x
    a[0] = a0
    h = 1.0 / tau
    for t in range(tau):
        z[t + 1] = z[t] + h * _fast.velocity(z[t], z[t], a[t], cfg.sigma)
        a[t + 1] = a[t] - h * _fast.hamiltonian_zgrad(z[t], a[t], cfg.sigma)
        if not (np.isfinite(z[t + 1]).all() and np.isfinite(a[t + 1]).all()):
            raise NumericAbort(f"shooting produced NaN at step {t + 1}")
    return TrajectoryBundle(z=z, a=a, sigma=cfg.sigma, sources=sources)


def kinetic_shooting(a0, sources: PointCloud, cfg: KernelConfig) -> float:
    """Initial kernel quadratic form a0 . K(x, x) a0 (conserved along shots)."""
    return float(np.sum(_fast.quad_energy_rows(sources.points,
                                               np.ascontiguousarray(a0, dtype=np.float64),
                                               cfg.sigma)))


def energy_shooting(a0, sources: PointCloud, target: PointCloud, lam: float,
                    cfg: KernelConfig, loss: LossConfig, tau: int) -> float:
    bundle = shoot(a0, sources, cfg, tau)
    evaluator = LossEvaluator(loss, target)
    return evaluator.value(bundle.z[tau]) + lam * kinetic_shooting(a0, sources, cfg)


def _shooting_pullback(z, a, seed_wz, sigma, tau) -> np.ndarray:
    """Reverse sweep of the Hamiltonian Euler recursion.

    Propagates cosensitivities (wz, wa) from t = tau to 0 starting from
    wz[tau] = seed_wz, wa[tau] = 0 and returns dE/da0 of the fidelity part.
    """
    h = 1.0 / tau
    wz = seed_wz.copy()
    wa = np.zeros_like(seed_wz)
    for t in range(tau - 1, -1, -1):
        zt, at = z[t], a[t]
        wz_new = wz + h * _fast.vjp_velocity_z(zt, at, wz, sigma)
        wz_new -= h * _fast.vjp_hzgrad_z(zt, at, wa, sigma)
        wa_new = wa + h * _fast.velocity(zt, zt, wz, sigma)
        wa_new -= h * _fast.vjp_hzgrad_a(zt, at, wa, sigma)
        wz, wa = wz_new, wa_new
    return wa


def grad_shooting(a0, sources: PointCloud, target: PointCloud, lam: float,
                  cfg: KernelConfig, loss: LossConfig, tau: int) -> np.ndarray:
    """Exact gradient of energy_shooting with respect to the initial momentum."""
    bundle = shoot(a0, sources, cfg, tau)
    evaluator = LossEvaluator(loss, target)
    seed = evaluator.grad(bundle.z[tau])
    grad = _shooting_pullback(bundle.z, bundle.a, seed, cfg.sigma, tau)
    a0 = np.ascontiguousarray(a0, dtype=np.float64)
    grad += (2.0 * lam) * _fast.velocity(bundle.z[0], bundle.z[0], a0, cfg.sigma)
    return grad


def apply_deformation(new_points, bundle: TrajectoryBundle, t: int) -> np.ndarray:
    """Transport new points through the stored velocity fields up to node t.

    The point is updated between steps (trajectory-consistent flow), so
    replaying the sources reproduces z[t] along the same arithmetic path.
    """
    tau = bundle.tau
    if not 0 <= t <= tau:
        raise ValueError(f"time index must lie in [0, {tau}], got {t}")
    x = np.ascontiguousarray(new_points, dtype=np.float64).copy()
    h = 1.0 / tau
    for s in range(t):
        x += h * _fast.velocity(x, bundle.z[s], bundle.a[s], bundle.sigma)
    return x


def invert_deformation(points, bundle: TrajectoryBundle, tol: float = 0.0) -> np.ndarray:
    """Integrate the time-reversed negated velocity field (diagnostic).

    With tol <= 0 each backward step is one explicit Euler step of the
    negated field, giving an O(1/tau) round-trip error.  With tol > 0 each
    forward Euler step is inverted exactly by fixed-point iteration until
    the update drops below tol.
    """
    tau = bundle.tau
    x = np.ascontiguousarray(points, dtype=np.float64).copy()
    h = 1.0 / tau
    for s in range(tau - 1, -1, -1):
        if tol <= 0.0:
            x -= h * _fast.velocity(x, bundle.z[s], bundle.a[s], bundle.sigma)
        else:
            y = x.copy()
            for _ in range(100):
                y_new = x - h * _fast.velocity(y, bundle.z[s], bundle.a[s], bundle.sigma)
                delta = float(np.abs(y_new - y).max())
                y = y_new
                if delta < tol:
                    break
            x = y
    return x
