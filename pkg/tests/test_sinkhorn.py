import numpy as np
import pytest

from sinkreg.errors import NumericAbort
from sinkreg.sinkhorn import (LossConfig, brute_force_entropic_cost,
                              entropic_cost, loss_gradient_points, loss_value,
                              marginal_violation, mmd_sq, sinkhorn_divergence,
                              sinkhorn_potentials, symmetric_potential,
                              LossEvaluator)

from oracles import central_diff_grad, entropic_cost_2x2_grid, mmd_sq_loops

TIGHT = dict(tol=1e-12, max_iter=1_000_000)


def tight_loss(kind, **kw):
    return LossConfig(kind, sinkhorn_tol=1e-12, sinkhorn_max_iter=1_000_000, **kw)


# ---------------------------------------------------------------------------
# Potentials
# ---------------------------------------------------------------------------


def test_single_identical_point():
    x = np.zeros((1, 2))
    pots = sinkhorn_potentials(x, x, epsilon=0.3)
    assert pots.converged
    assert pots.residual == 0.0
    assert pots.f[0] == pytest.approx(0.0, abs=1e-15)
    assert pots.g[0] == pytest.approx(0.0, abs=1e-15)


def test_forced_coupling_dual_value():
    # alpha = delta_0, beta = delta_1 in 1-D: optimum at f + g = C = 1
    x, y = np.zeros((1, 1)), np.ones((1, 1))
    for eps in (10.0, 1.0, 0.1, 1e-3):
        pots = sinkhorn_potentials(x, y, eps, **TIGHT)
        assert pots.f[0] + pots.g[0] == pytest.approx(1.0, abs=1e-10)
        assert entropic_cost(x, y, eps, **TIGHT) == pytest.approx(1.0, abs=1e-10)


def test_marginal_condition_invariant():
    x = np.array([[0.0], [1.0]])
    pots = sinkhorn_potentials(x, x, epsilon=0.1, tol=1e-8, max_iter=10**6)
    assert pots.converged
    assert marginal_violation(x, x, pots) < 1e-6


def test_gauge_fixing():
    rng = np.random.default_rng(0)
    x, y = rng.random((7, 2)), rng.random((5, 2))
    pots = sinkhorn_potentials(x, y, 0.5)
    assert abs(pots.f.mean() - pots.g.mean()) < 1e-12


def test_nonconvergence_flag():
    rng = np.random.default_rng(1)
    x, y = rng.random((10, 2)), rng.random((10, 2)) + 2.0
    pots = sinkhorn_potentials(x, y, 1e-3, tol=1e-10, max_iter=3)
    assert not pots.converged
    assert pots.iterations == 3


def test_unconverged_gradient_refused():
    rng = np.random.default_rng(2)
    x, y = rng.random((10, 2)), rng.random((10, 2)) + 2.0
    cfg = LossConfig("entropic_cost", epsilon=1e-3, sinkhorn_max_iter=3)
    with pytest.raises(NumericAbort, match="converge"):
        loss_gradient_points(cfg, x, y)


def test_warm_start_converges_to_same_potentials():
    rng = np.random.default_rng(3)
    x, y = rng.random((8, 2)), rng.random((9, 2))
    cold = sinkhorn_potentials(x, y, 0.2, **TIGHT)
    warm = sinkhorn_potentials(x, y, 0.2, init=(cold.f + 0.05, cold.g - 0.02), **TIGHT)
    np.testing.assert_allclose(warm.f, cold.f, atol=1e-9)
    np.testing.assert_allclose(warm.g, cold.g, atol=1e-9)


def test_accelerated_updates_same_fixed_point():
    rng = np.random.default_rng(4)
    x, y = rng.random((12, 2)), rng.random((11, 2))
    plain = sinkhorn_potentials(x, y, 0.05, **TIGHT)
    fast = sinkhorn_potentials(x, y, 0.05, accel=1.7, **TIGHT)
    assert fast.iterations < plain.iterations
    np.testing.assert_allclose(fast.f, plain.f, atol=1e-9)


# ---------------------------------------------------------------------------
# Cost values against independent oracles
# ---------------------------------------------------------------------------


def test_self_cost_zero_single_point():
    x = np.array([[0.4, -0.2]])
    assert entropic_cost(x, x, 1.0, **TIGHT) == pytest.approx(0.0, abs=1e-12)


def test_2x2_uniform_grid_oracle():
    x = np.array([[0.0], [1.0]])
    for eps in (0.05, 0.1, 0.7, 3.0):
        want = entropic_cost_2x2_grid(eps)
        got = entropic_cost(x, x, eps, **TIGHT)
        assert got == pytest.approx(want, abs=1e-5)


def test_mirror_descent_oracle_forced():
    x, y = np.zeros((1, 1)), np.ones((1, 1))
    assert brute_force_entropic_cost(x, y, 0.5) == pytest.approx(1.0, abs=1e-8)


def test_mirror_descent_cross_oracle_agreement():
    x = np.array([[0.0], [1.0]])
    for eps in (0.1, 1.0):
        grid = entropic_cost_2x2_grid(eps)
        mirror = brute_force_entropic_cost(x, x, eps)
        assert mirror == pytest.approx(grid, abs=1e-6)


def test_large_epsilon_product_limit():
    # KL dominates: coupling -> product measure, cost -> mean of C = 1/2
    x = np.array([[0.0], [1.0]])
    got = brute_force_entropic_cost(x, x, 1e3)
    mean_c = 0.5
    assert got == pytest.approx(mean_c, abs=1e-3)
    assert entropic_cost(x, x, 1e3, **TIGHT) == pytest.approx(got, abs=1e-6)


def test_brute_force_rejects_large_instances():
    rng = np.random.default_rng(5)
    with pytest.raises(ValueError):
        brute_force_entropic_cost(rng.random((4, 2)), rng.random((3, 2)), 0.1)


def test_entropic_cost_monotone_in_epsilon():
    # empirical sanity check on the 2x2 case, not a cited theorem
    x = np.array([[0.0], [1.0]])
    vals = [entropic_cost(x, x, eps, **TIGHT)
            for eps in (1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3)]
    assert all(a <= b + 1e-12 for a, b in zip(vals, vals[1:]))


def test_dual_value_two_forms_agree():
    rng = np.random.default_rng(6)
    x, y = rng.random((9, 2)), rng.random((7, 2))
    tol = 1e-8
    pots = sinkhorn_potentials(x, y, 0.3, tol=tol, max_iter=10**6)
    simplified = pots.f.mean() + pots.g.mean()
    full = entropic_cost(x, y, 0.3, tol=tol, max_iter=10**6)
    assert abs(full - simplified) < 10 * tol


# ---------------------------------------------------------------------------
# Divergence properties
# ---------------------------------------------------------------------------


def test_divergence_self_zero():
    rng = np.random.default_rng(7)
    for eps in (1.0, 1e-2):
        x = rng.random((20, 2))
        assert abs(sinkhorn_divergence(x, x, eps)) < 1e-6


def test_divergence_positivity_sweep():
    rng = np.random.default_rng(8)
    for _ in range(100):
        n, m = int(rng.integers(2, 16)), int(rng.integers(2, 16))
        d = int(rng.integers(1, 4))
        x, y = rng.random((n, d)), rng.random((m, d))
        eps = float(rng.choice([1.0, 0.1, 0.01]))
        assert sinkhorn_divergence(x, y, eps) >= -1e-6


def test_divergence_single_points():
    x, y = np.zeros((1, 1)), np.ones((1, 1))
    assert sinkhorn_divergence(x, y, 0.5, **TIGHT) == pytest.approx(1.0, abs=1e-10)


def test_divergence_symmetry():
    rng = np.random.default_rng(9)
    x, y = rng.random((10, 3)), rng.random((12, 3))
    ab = sinkhorn_divergence(x, y, 0.2, tol=1e-10, max_iter=10**6)
    ba = sinkhorn_divergence(y, x, 0.2, tol=1e-10, max_iter=10**6)
    assert abs(ab - ba) < 1e-8


def test_entropic_bias_observable():
    rng = np.random.default_rng(10)
    x = rng.random((15, 2))
    tol = 1e-6
    t_self = entropic_cost(x, x, 1.0)
    s_self = sinkhorn_divergence(x, x, 1.0)
    assert t_self > 10 * tol
    assert abs(s_self) <= 1e-6


# ---------------------------------------------------------------------------
# MMD
# ---------------------------------------------------------------------------


def test_mmd_identical_clouds():
    rng = np.random.default_rng(11)
    x = rng.random((9, 2))
    assert mmd_sq(x, x, 0.3) == pytest.approx(0.0, abs=1e-14)


def test_mmd_two_deltas_closed_form():
    for r, theta in ((0.5, 0.2), (1.0, 1.0), (2.0, 0.7)):
        got = mmd_sq(np.zeros((1, 1)), np.full((1, 1), r), theta)
        want = 2.0 * (1.0 - np.exp(-r * r / (2 * theta * theta)))
        assert got == pytest.approx(want, abs=1e-14)


def test_mmd_brute_force_oracle():
    rng = np.random.default_rng(12)
    x, y = rng.random((5, 3)), rng.random((5, 3))
    assert mmd_sq(x, y, 0.4) == pytest.approx(mmd_sq_loops(x, y, 0.4), abs=1e-12)


# ---------------------------------------------------------------------------
# Gradients
# ---------------------------------------------------------------------------


def test_gradient_zero_at_identity():
    rng = np.random.default_rng(13)
    x = rng.random((8, 2))
    cfg = tight_loss("sinkhorn_divergence", epsilon=0.1)
    grad = loss_gradient_points(cfg, x, x.copy())
    assert np.abs(grad).max() < 1e-6


def test_entropic_gradient_two_deltas():
    x = np.array([[0.2, -0.1]])
    y = np.array([[1.0, 0.5]])
    cfg = tight_loss("entropic_cost", epsilon=0.3)
    grad = loss_gradient_points(cfg, x, y)
    np.testing.assert_allclose(grad, 2.0 * (x - y), atol=1e-9)


@pytest.mark.parametrize("kind,params", [
    ("sinkhorn_divergence", {"epsilon": 1.0}),
    ("sinkhorn_divergence", {"epsilon": 0.01}),
    ("entropic_cost", {"epsilon": 1.0}),
    ("entropic_cost", {"epsilon": 0.01}),
    ("mmd_sq", {"theta": 0.4}),
])
def test_gradients_match_finite_differences(kind, params):
    rng = np.random.default_rng(14)
    x, y = rng.random((6, 2)), rng.random((6, 2))
    cfg = tight_loss(kind, **params)
    grad = loss_gradient_points(cfg, x, y)
    fd = central_diff_grad(lambda pts: loss_value(cfg, pts, y), x, step=1e-5)
    rel = np.abs(grad - fd).max() / max(np.abs(fd).max(), 1e-12)
    assert rel <= 1e-4


def test_evaluator_matches_public_ops():
    rng = np.random.default_rng(15)
    x, y = rng.random((7, 2)), rng.random((6, 2))
    from sinkreg.geometry import PointCloud
    cfg = tight_loss("sinkhorn_divergence", epsilon=0.2)
    ev = LossEvaluator(cfg, PointCloud(y))
    v1, g1 = ev.value_and_grad(x)
    v2, g2 = ev.value_and_grad(x)  # warm-started second call
    assert v1 == pytest.approx(sinkhorn_divergence(x, y, 0.2, **TIGHT), abs=1e-9)
    assert v2 == pytest.approx(v1, abs=1e-9)
    np.testing.assert_allclose(g1, loss_gradient_points(cfg, x, y), atol=1e-10)
    np.testing.assert_allclose(g2, g1, atol=1e-9)


def test_nan_detection_aborts():
    x = np.array([[0.0, 0.0], [1e160, 1e160]])
    y = np.zeros((2, 2))
    with pytest.raises((NumericAbort, ValueError)):
        sinkhorn_potentials(x * np.inf, y, 0.1)
