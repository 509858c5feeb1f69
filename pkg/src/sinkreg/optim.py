"""First-order and quasi-second-order minimizers over flat parameter vectors.

Callers flatten their momentum tensors before entering here; all shape
bookkeeping stays on their side.  The objective callable must return
(value, gradient) for a given vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericAbort

# Armijo backtracking constants
ARMIJO_C1 = 1e-4
ARMIJO_SHRINK = 0.5
ARMIJO_MAX_TRIALS = 40

STATUS_MAX_ITER = "max_iter"
STATUS_GRAD_TOL = "grad_tol"
STATUS_LINE_SEARCH = "line_search_failure"


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str = "lbfgs"  # {"fixed_step_gd", "lbfgs"}
    step: float = 0.1
    max_iter: int = 100
    memory: int = 10
    grad_tol: float = 1e-12

    def __post_init__(self):
        if self.kind not in ("fixed_step_gd", "lbfgs"):
            raise ValueError(f"unknown optimizer kind {self.kind!r}")
        if not self.step > 0.0:
            raise ValueError("step must be positive")
        if self.max_iter < 1 or self.memory < 1:
            raise ValueError("max_iter and memory must be >= 1")


@dataclass
class MinimizeResult:
    x: np.ndarray
    value: float
    trace: np.ndarray  # accepted objective values, starting at x0
    status: str
    iterations: int


def _eval(fun, x, where):
    value, grad = fun(x)
    grad = np.asarray(grad, dtype=np.float64)
    if not np.isfinite(value) or not np.isfinite(grad).all():
        raise NumericAbort(f"objective returned NaN/inf at {where}")
    return float(value), grad


def minimize(fun, x0, cfg: OptimizerConfig) -> MinimizeResult:
    x = np.asarray(x0, dtype=np.float64).copy()
    value, grad = _eval(fun, x, "iteration 0")
    trace = [value]
    if np.abs(grad).max() <= cfg.grad_tol:
        return MinimizeResult(x, value, np.asarray(trace), STATUS_GRAD_TOL, 0)
    if cfg.kind == "fixed_step_gd":
        return _fixed_step_gd(fun, x, value, grad, trace, cfg)
    return _lbfgs(fun, x, value, grad, trace, cfg)


def _fixed_step_gd(fun, x, value, grad, trace, cfg) -> MinimizeResult:
    status = STATUS_MAX_ITER
    it = 0
    for it in range(1, cfg.max_iter + 1):
        x = x - cfg.step * grad
        value, grad = _eval(fun, x, f"iteration {it}")
        trace.append(value)
        if np.abs(grad).max() <= cfg.grad_tol:
            status = STATUS_GRAD_TOL
            break
    return MinimizeResult(x, value, np.asarray(trace), status, it)


def _two_loop(grad, s_list, y_list, rho_list):
    q = grad.copy()
    alphas = []
    for s, y, rho in zip(reversed(s_list), reversed(y_list), reversed(rho_list)):
        a = rho * np.dot(s, q)
        alphas.append(a)
        q -= a * y
    if s_list:
        s, y = s_list[-1], y_list[-1]
        q *= np.dot(s, y) / np.dot(y, y)
    for (s, y, rho), a in zip(zip(s_list, y_list, rho_list), reversed(alphas)):
        b = rho * np.dot(y, q)
        q += (a - b) * s
    return q


def _lbfgs(fun, x, value, grad, trace, cfg) -> MinimizeResult:
    s_list, y_list, rho_list = [], [], []
    status = STATUS_MAX_ITER
    it = 0
    for it in range(1, cfg.max_iter + 1):
        direction = -_two_loop(grad, s_list, y_list, rho_list)
        slope = np.dot(grad, direction)
        if slope >= 0.0:  # skipped pairs can spoil the model; fall back to steepest descent
            direction = -grad
            slope = -np.dot(grad, grad)
        step = 1.0
        if not s_list:
            step = min(1.0, 1.0 / max(np.abs(grad).max(), 1e-30))
        accepted = False
        for _ in range(ARMIJO_MAX_TRIALS):
            x_try = x + step * direction
            try:
                v_try, g_try = _eval(fun, x_try, f"iteration {it} (trial)")
            except NumericAbort:
                step *= ARMIJO_SHRINK  # overflow region: treat as failed trial
                continue
            if v_try <= value + ARMIJO_C1 * step * slope:
                accepted = True
                break
            step *= ARMIJO_SHRINK
        if not accepted:
            status = STATUS_LINE_SEARCH
            it -= 1
            break
        s = x_try - x
        y = g_try - grad
        sy = float(np.dot(s, y))
        if sy > 1e-14 * np.linalg.norm(s) * np.linalg.norm(y):
            s_list.append(s)
            y_list.append(y)
            rho_list.append(1.0 / sy)
            if len(s_list) > cfg.memory:
                s_list.pop(0)
                y_list.pop(0)
                rho_list.pop(0)
        x, value, grad = x_try, v_try, g_try
        trace.append(value)
        if np.abs(grad).max() <= cfg.grad_tol:
            status = STATUS_GRAD_TOL
            break
    return MinimizeResult(x, value, np.asarray(trace), status, it)
