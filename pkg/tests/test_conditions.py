import math

import numpy as np
import pytest

from feedback_market import GridMismatch, PriceMechanism, RateField
from feedback_market.conditions import MatrixPath, check_containment_bound, \
    check_growth_bound, check_phi_psi_convergence, check_rate_regularity, \
    estimate_semi_lipschitz_M, simplex_lattice, uniform_metric
from feedback_market.lux3 import Lux3Params, mechanism, mechanism_finite

from conftest import SYMMETRIC_A


def step_path(rng, grid, r=2, scale=1.0):
    return MatrixPath(grid, rng.uniform(-scale, scale, size=(len(grid), r, r)))


GRID25 = np.linspace(0.0, 25.0, 126)
GRID45 = np.linspace(0.0, 45.0, 226)


# -- uniform path metric --


def test_metric_identical_paths():
    rng = np.random.default_rng(0)
    u = step_path(rng, GRID25)
    assert uniform_metric(u, u, 20.0, 1e-3) == 0.0


def test_metric_constant_half():
    u = MatrixPath(GRID25, np.zeros((126, 2, 2)))
    v = MatrixPath(GRID25, np.full((126, 2, 2), 0.125))  # entrywise sum 0.5
    val = uniform_metric(u, v, 20.0, 2e-5)
    assert val == pytest.approx(0.5 * (1 - math.exp(-20.0)), abs=1e-10)


def test_metric_capped_at_one():
    u = MatrixPath(GRID25, np.zeros((126, 2, 2)))
    v = MatrixPath(GRID25, np.full((126, 2, 2), 0.5))  # entrywise sum 2 -> capped
    val = uniform_metric(u, v, 20.0, 2e-5)
    assert val == pytest.approx(1 - math.exp(-20.0), abs=1e-10)


def test_metric_grid_mismatch():
    rng = np.random.default_rng(1)
    u = step_path(rng, GRID25)
    v = step_path(rng, np.linspace(0.0, 25.0, 63))
    with pytest.raises(GridMismatch):
        uniform_metric(u, v, 20.0, 1e-3)
    short = step_path(rng, np.linspace(0.0, 3.0, 10))
    with pytest.raises(GridMismatch):
        uniform_metric(short, short, 20.0, 1e-3)


def test_metric_pseudometric_properties():
    rng = np.random.default_rng(5)
    grid = np.linspace(0.0, 6.0, 25)
    for _ in range(300):
        u, v, w = (step_path(rng, grid) for _ in range(3))
        duv = uniform_metric(u, v, 5.0, 1e-3)
        dvu = uniform_metric(v, u, 5.0, 1e-3)
        assert duv == dvu  # symmetry is exact
        duw = uniform_metric(u, w, 5.0, 1e-3)
        dvw = uniform_metric(v, w, 5.0, 1e-3)
        assert duw <= duv + dvw + 1e-10


def test_metric_truncation_control():
    rng = np.random.default_rng(9)
    for _ in range(20):
        u = step_path(rng, GRID45)
        v = step_path(rng, GRID45)
        d20 = uniform_metric(u, v, 20.0, 1e-3)
        d40 = uniform_metric(u, v, 40.0, 1e-3)
        assert abs(d40 - d20) <= math.exp(-20.0) + 1e-12


# -- rate regularity --


def lattice3():
    return simplex_lattice(3, 8)


def test_rate_regularity_zero_field():
    rep = check_rate_regularity(RateField.zero(3), [0.0, 1.0], lattice3(), [-1.0, 0.0, 1.0])
    assert rep.passed


def test_rate_regularity_symmetric():
    rep = check_rate_regularity(RateField.constant(SYMMETRIC_A), [0.0, 0.5], lattice3(), [0.0])
    assert rep.passed


def test_rate_regularity_planted_violation():
    bad = RateField(raw=lambda t, x, q: np.array([[0.1, -0.1], [1.0, -1.0]]))
    rep = check_rate_regularity(bad, [0.0], simplex_lattice(2, 4), [0.0])
    assert not rep.passed
    assert rep.witness is not None
    assert rep.measured == pytest.approx(0.1, abs=1e-15)


# -- mechanism convergence --


def test_phi_psi_convergence_equal_mechs():
    m = PriceMechanism.affine(lambda t: -1.0, lambda t: 0.5)
    rows = check_phi_psi_convergence([(10, m), (100, m)], m, [0.0, 1.0], lattice3(), [0.0])
    assert all(sp == 0.0 and ss == 0.0 for _, sp, ss in rows)


def test_phi_psi_convergence_planted_offset():
    m = PriceMechanism.affine(lambda t: -1.0, lambda t: 0.5)
    mechs = [(N, PriceMechanism.affine(lambda t, N=N: -1.0 + 1.0 / N, lambda t: 0.5))
             for N in (10, 100, 1000)]
    rows = check_phi_psi_convergence(mechs, m, [0.0, 1.0], lattice3(), [0.0])
    for N, sup_phi, sup_psi in rows:
        assert sup_phi == pytest.approx(1.0 / N, abs=1e-15)
        assert sup_psi == 0.0


def test_phi_psi_convergence_time_discretized_market():
    # linear-in-t coefficients: flooring to the tick grid converges at O(1/N)
    p = Lux3Params(
        alpha=(lambda t: 1.0 + 0.2 * t, lambda t: 1.0, lambda t: 1.0),
        beta=(lambda t: -0.5 - 0.1 * t, lambda t: -0.5, lambda t: -0.5),
        delta=(lambda t: 0.3, lambda t: 0.3, lambda t: 0.3),
        log_fundamental=lambda t: 0.1 * t,
    )
    m = mechanism(p)
    ns = (8, 32, 128)
    mechs = [(N, mechanism_finite(p, N)) for N in ns]
    times = np.linspace(0.0, 1.0, 41)
    rows = check_phi_psi_convergence(mechs, m, times, simplex_lattice(3, 4), [0.0])
    sups = [max(sp, ss) for _, sp, ss in rows]
    assert sups[0] > sups[1] > sups[2] > 0
    # O(1/N): quadrupling N cuts the sup by roughly 4
    assert sups[0] / sups[1] == pytest.approx(4.0, rel=0.5)
    assert sups[1] / sups[2] == pytest.approx(4.0, rel=0.5)


# -- growth bound --


TIMES = np.linspace(0.0, 10.0, 201)
POINTS = [(None, None)]


def test_growth_bound_constant():
    fit = check_growth_bound(lambda t, pt: 1.0, TIMES, POINTS)
    assert fit.passed
    assert fit.C == pytest.approx(1.0, rel=1e-6)
    assert fit.lam == pytest.approx(0.0, abs=1e-9)


def test_growth_bound_exact_exponential():
    fit = check_growth_bound(lambda t, pt: 2.0 * math.exp(0.5 * t), TIMES, POINTS)
    assert fit.passed
    assert fit.C == pytest.approx(2.0, rel=0.05)
    assert fit.lam == pytest.approx(0.5, rel=0.05)


def test_growth_bound_polynomial_under_exponential():
    fit = check_growth_bound(lambda t, pt: t, TIMES, POINTS)
    assert fit.passed
    assert fit.max_violation <= 0.0


# -- containment --


def test_containment_k0_equality():
    rep = check_containment_bound([1.5], q0=1.5, C_T=1.0, N=10)
    assert rep.passed
    assert rep.measured == pytest.approx(0.0, abs=1e-15)


def test_containment_single_tick_boundary():
    rep = check_containment_bound([0.0, 0.1], q0=0.0, C_T=1.0, N=10)
    assert rep.passed


def test_containment_planted_violation():
    rep = check_containment_bound([0.0, 1.0], q0=0.0, C_T=1.0, N=10)
    assert not rep.passed
    assert rep.witness["k"] == 1


# -- semi-Lipschitz estimate --


def test_semi_lipschitz_identical_paths():
    p = Lux3Params.constant((1, 1, 1), (-1, -0.5, -0.5), (0.5, 0.5, 0.5), 0.0)
    grid = np.linspace(0.0, 2.0, 201)
    x = np.tile([0.5, 0.25, 0.25], (201, 1))
    est = estimate_semi_lipschitz_M(p, [(x, x.copy())], grid, q0=1.0)
    assert est.M == 0.0


def test_semi_lipschitz_constant_paths_finite():
    p = Lux3Params.constant((1.0, 1.0, 1.0), (-1.0, -0.5, -0.5), (0.0, 0.0, 0.0), 0.0)
    grid = np.linspace(0.0, 2.0, 201)
    xa = np.tile([1.0, 0.0, 0.0], (201, 1))
    xb = np.tile([0.5, 0.25, 0.25], (201, 1))
    est = estimate_semi_lipschitz_M(p, [(xa, xb)], grid, q0=1.0)
    assert 0.0 < est.M < math.inf
    assert est.min_abs_denominator > 0.5


def test_semi_lipschitz_degeneracy_proximity():
    grid = np.linspace(0.0, 1.0, 101)
    xa = np.tile([0.9, 0.05, 0.05], (101, 1))
    xb = np.tile([0.8, 0.1, 0.1], (101, 1))

    def est_for(eps):
        # alpha2(1+beta2), alpha3(1+beta3) -> eps shrinks the boundary denominator
        p = Lux3Params.constant((1.0, 1.0, 1.0), (-1.0, -1.0 + eps, -1.0 + eps),
                                (0.5, 0.5, 0.5), 0.0, b_lower=1e-12)
        return estimate_semi_lipschitz_M(p, [(xa, xb)], grid, q0=1.0)

    wide = est_for(0.5)
    narrow = est_for(0.01)
    assert narrow.min_abs_denominator < wide.min_abs_denominator
    assert narrow.M >= wide.M * 0.5  # ratio does not collapse as degeneracy nears
