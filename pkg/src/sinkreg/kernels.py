"""Gaussian RKHS kernel and the pairwise reductions built on it.

The kernel keeps the scalar normalization (2 pi sigma^2)^(-1/2); bandwidth
parameters elsewhere in the package are only meaningful with it.  The
matrix-valued kernel is this scalar times the identity, so applying it to a
vector is a scalar multiplication.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _fast


@dataclass(frozen=True)
class KernelConfig:
    """Gaussian kernel bandwidth, in length units of the normalized cloud."""

    sigma: float

    def __post_init__(self):
        if not self.sigma > 0.0:
            raise ValueError("kernel bandwidth sigma must be positive")

    @property
    def norm_const(self) -> float:
        return 1.0 / np.sqrt(2.0 * np.pi * self.sigma**2)


def gauss_kernel(x, y, cfg: KernelConfig) -> float:
    """Scalar kernel value (2 pi sigma^2)^(-1/2) exp(-|x-y|^2 / (2 sigma^2))."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError("x and y must have the same dimension")
    sq = float(np.sum((x - y) ** 2))
    return cfg.norm_const * np.exp(-sq / (2.0 * cfg.sigma**2))


def velocity_field(query, centers, momenta, cfg: KernelConfig) -> np.ndarray:
    """Kernel expansion out_q = sum_i k(query_q, centers_i) momenta_i."""
    query = np.ascontiguousarray(query, dtype=np.float64)
    centers = np.ascontiguousarray(centers, dtype=np.float64)
    momenta = np.ascontiguousarray(momenta, dtype=np.float64)
    if centers.shape != momenta.shape:
        raise ValueError("centers and momenta must share their shape")
    if query.ndim != 2 or centers.ndim != 2 or query.shape[1] != centers.shape[1]:
        raise ValueError("query and centers must be (m, d) and (n, d) arrays")
    return _fast.velocity(query, centers, momenta, cfg.sigma)


def quadratic_energy(momenta, centers, cfg: KernelConfig) -> float:
    """Kernel quadratic form sum_ij a_i . k(z_i, z_j) a_j (always >= 0)."""
    centers = np.ascontiguousarray(centers, dtype=np.float64)
    momenta = np.ascontiguousarray(momenta, dtype=np.float64)
    if centers.shape != momenta.shape or centers.ndim != 2:
        raise ValueError("momenta and centers must be matching (n, d) arrays")
    return float(np.sum(_fast.quad_energy_rows(centers, momenta, cfg.sigma)))
