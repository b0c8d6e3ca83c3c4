import numpy as np
import pytest

from feedback_market import DriftField, MarketState, PriceMechanism, RateField, \
    SimplexPoint, drift, integrate_limit, volterra_residual
from feedback_market.core import Trajectory, validate_simplex

from conftest import SYMMETRIC_A


def const_mech(phi, psi):
    return PriceMechanism.affine(lambda t: phi, lambda t: psi)


CENTER = np.full(3, 1.0 / 3.0)


def symmetric_x_closed_form(times, x0):
    return CENTER + np.exp(-0.75 * np.asarray(times)[:, None]) * (np.asarray(x0) - CENTER)


def test_drift_zero_field():
    d = DriftField(rate=RateField.zero(3), mech=const_mech(0.0, 0.0))
    y = MarketState(SimplexPoint([0.2, 0.3, 0.5]), 1.0)
    assert np.array_equal(drift(d, 0.0, y), np.zeros(4))


def test_drift_symmetric_matrix_product():
    d = DriftField(rate=RateField.constant(SYMMETRIC_A), mech=const_mech(0.0, 0.0))
    y = MarketState(SimplexPoint([1.0, 0.0, 0.0]), 0.0)
    b = drift(d, 0.0, y)
    assert np.allclose(b[:3], [-0.5, 0.25, 0.25], atol=1e-15)
    assert abs(b[:3].sum()) < 1e-15


def test_drift_price_component_constant():
    d = DriftField(rate=RateField.zero(3), mech=const_mech(0.0, 7.0))
    for x in ([1.0, 0.0, 0.0], [0.2, 0.5, 0.3]):
        y = MarketState(SimplexPoint(x), -2.0)
        assert drift(d, 0.3, y)[3] == 7.0


def test_integrate_constant_trajectory():
    d = DriftField(rate=RateField.zero(3), mech=const_mech(0.0, 0.0))
    y0 = MarketState(SimplexPoint([0.2, 0.3, 0.5]), 1.5)
    traj = integrate_limit(d, y0, 1.0, 0.01)
    assert np.abs(traj.xs - np.array([0.2, 0.3, 0.5])).max() < 1e-15
    assert np.abs(traj.qs - 1.5).max() < 1e-15


def test_integrate_symmetric_decay():
    d = DriftField(rate=RateField.constant(SYMMETRIC_A), mech=const_mech(0.0, 0.0))
    y0 = MarketState(SimplexPoint([1.0, 0.0, 0.0]), 0.0)
    traj = integrate_limit(d, y0, 2.0, 1e-3)
    exact = symmetric_x_closed_form(traj.times, [1.0, 0.0, 0.0])
    assert np.abs(traj.xs - exact).max() <= 1e-8


def test_integrate_price_decay():
    d = DriftField(rate=RateField.zero(3), mech=const_mech(-1.0, 0.0))
    y0 = MarketState(SimplexPoint(CENTER), 1.0)
    traj = integrate_limit(d, y0, 2.0, 1e-3)
    assert np.abs(traj.qs - np.exp(-traj.times)).max() <= 1e-8


def test_simplex_conservation_along_flow():
    d = DriftField(rate=RateField.constant(SYMMETRIC_A), mech=const_mech(-0.5, 0.2))
    y0 = MarketState(SimplexPoint([0.9, 0.05, 0.05]), 0.3)
    traj = integrate_limit(d, y0, 3.0, 1e-2)
    for i in range(len(traj)):
        assert validate_simplex(traj.xs[i], tol=1e-9).ok


def test_fourth_order_accuracy():
    d = DriftField(rate=RateField.constant(SYMMETRIC_A), mech=const_mech(0.0, 0.0))
    y0 = MarketState(SimplexPoint([1.0, 0.0, 0.0]), 0.0)

    def max_err(h):
        traj = integrate_limit(d, y0, 2.0, h)
        return np.abs(traj.xs - symmetric_x_closed_form(traj.times, [1.0, 0.0, 0.0])).max()

    ratio = max_err(0.08) / max_err(0.04)
    assert 12.0 <= ratio <= 20.0


def test_volterra_residual_fixed_point_zero():
    d = DriftField(rate=RateField.constant(SYMMETRIC_A), mech=const_mech(0.0, 0.0))
    times = np.linspace(0.0, 1.0, 101)
    xs = np.tile(CENTER, (101, 1))
    qs = np.full(101, 2.0)
    traj = Trajectory(times=times, xs=xs, qs=qs)
    assert volterra_residual(d, traj) < 1e-12


def test_volterra_residual_quadrature_order():
    d = DriftField(rate=RateField.constant(SYMMETRIC_A), mech=const_mech(0.0, 0.0))
    y0 = MarketState(SimplexPoint([1.0, 0.0, 0.0]), 0.0)
    res_coarse = volterra_residual(d, integrate_limit(d, y0, 2.0, 1e-2))
    res_fine = volterra_residual(d, integrate_limit(d, y0, 2.0, 1e-3))
    assert res_coarse / res_fine == pytest.approx(100.0, rel=0.15)


def test_volterra_residual_non_solution():
    # frozen mix with a manufactured q(t) = t under zero drift: defect is q itself
    d = DriftField(rate=RateField.zero(3), mech=const_mech(0.0, 0.0))
    times = np.linspace(0.0, 2.0, 201)
    xs = np.tile(CENTER, (201, 1))
    traj = Trajectory(times=times, xs=xs, qs=times.copy())
    assert volterra_residual(d, traj) == pytest.approx(2.0, abs=1e-12)


def test_two_step_sizes_agree():
    d = DriftField(rate=RateField.constant(SYMMETRIC_A), mech=const_mech(-1.0, 0.5))
    y0 = MarketState(SimplexPoint([0.7, 0.2, 0.1]), 1.0)
    t1 = integrate_limit(d, y0, 2.0, 1e-2)
    t2 = integrate_limit(d, y0, 2.0, 5e-3)
    # compare on the shared grid (every second point of the fine run)
    gap = max(np.abs(t1.xs - t2.xs[::2]).max(), np.abs(t1.qs - t2.qs[::2]).max())
    assert gap < 1e-9


def test_lipschitz_separation_bound():
    d = DriftField(rate=RateField.constant(SYMMETRIC_A), mech=const_mech(-1.0, 0.0))
    eps = 1e-6
    y0 = MarketState(SimplexPoint([0.5, 0.3, 0.2]), 1.0)
    y1 = MarketState(SimplexPoint([0.5 + eps, 0.3 - eps, 0.2]), 1.0)
    T = 2.0
    ta = integrate_limit(d, y0, T, 1e-3)
    tb = integrate_limit(d, y1, T, 1e-3)
    sep = np.linalg.norm(
        np.column_stack([ta.xs - tb.xs, ta.qs - tb.qs]), axis=1).max()
    # probe the drift's Lipschitz constant on the relevant region
    L = 0.0
    rng = np.random.default_rng(2)
    for _ in range(200):
        xa = rng.dirichlet(np.ones(3))
        xb = rng.dirichlet(np.ones(3))
        qa, qb = rng.uniform(-1, 2, 2)
        fa = np.concatenate([xa @ SYMMETRIC_A, [-qa]])
        fb = np.concatenate([xb @ SYMMETRIC_A, [-qb]])
        dy = np.linalg.norm(np.concatenate([xa - xb, [qa - qb]]))
        if dy > 1e-9:
            L = max(L, np.linalg.norm(fa - fb) / dy)
    init_gap = np.linalg.norm(np.concatenate([y0.x.coords - y1.x.coords, [0.0]]))
    assert sep <= np.exp(L * T) * init_gap * 1.1


def test_simplex_escape_on_oversized_step():
    import pytest as _pytest
    from feedback_market import SimplexEscape
    fast = RateField.constant(np.array(SYMMETRIC_A) * 100.0)
    d = DriftField(rate=fast, mech=const_mech(0.0, 0.0))
    y0 = MarketState(SimplexPoint([1.0, 0.0, 0.0]), 0.0)
    with _pytest.raises(SimplexEscape):
        integrate_limit(d, y0, 1.0, 0.1)
