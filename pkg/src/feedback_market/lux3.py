"""The concrete three-type market (fundamentalists, optimists, pessimists):
excess demand, market clearing, the closed-form drift decomposition, the
closed-form log-price path for a frozen mix path, and the stationary-point
(fixed point) machinery of the joint mix/price flow.

Type indices are 0-based: 0 = fundamentalist, 1 = optimist, 2 = pessimist.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .core import CountVector, SimplexPoint
from .errors import DegenerateDenominator, ExtensionUnavailable, NoConvergence
from .kernel import RateField
from .price import PriceMechanism

Q_LARGE = 1e8
_CAUCHY_TOL = 1e-9


def _coords(x) -> np.ndarray:
    return np.asarray(getattr(x, "coords", x), dtype=np.float64)


@dataclass(frozen=True)
class Lux3Params:
    """Market coefficients: demand sensitivities alpha_i(t), reference-level
    coefficients beta_i(t) <= 0, liquidity demands delta_i(t), and the log
    fundamental value.  b_lower is the lower bound enforced on the
    market-clearing denominator."""

    alpha: tuple[Callable[[float], float], Callable[[float], float], Callable[[float], float]]
    beta: tuple[Callable[[float], float], Callable[[float], float], Callable[[float], float]]
    delta: tuple[Callable[[float], float], Callable[[float], float], Callable[[float], float]]
    log_fundamental: Callable[[float], float]
    b_lower: float = 1e-9

    @staticmethod
    def constant(alpha: Sequence[float], beta: Sequence[float], delta: Sequence[float],
                 log_fundamental: float, b_lower: float = 1e-9) -> "Lux3Params":
        a = tuple(float(v) for v in alpha)
        b = tuple(float(v) for v in beta)
        d = tuple(float(v) for v in delta)
        f = float(log_fundamental)
        if len(a) != 3 or len(b) != 3 or len(d) != 3:
            raise ValueError("alpha, beta, delta need 3 entries each")
        if any(v > 0 for v in b):
            raise ValueError("beta coefficients must be <= 0")
        return Lux3Params(
            alpha=tuple((lambda t, v=v: v) for v in a),
            beta=tuple((lambda t, v=v: v) for v in b),
            delta=tuple((lambda t, v=v: v) for v in d),
            log_fundamental=lambda t: f,
            b_lower=b_lower,
        )

    def at(self, t: float) -> tuple[float, ...]:
        """(a1, a2, a3, b1, b2, b3, d1, d2, d3, logF) at time t."""
        return (
            self.alpha[0](t), self.alpha[1](t), self.alpha[2](t),
            self.beta[0](t), self.beta[1](t), self.beta[2](t),
            self.delta[0](t), self.delta[1](t), self.delta[2](t),
            self.log_fundamental(t),
        )

    def validate_times(self, times) -> None:
        """Check beta <= 0 and a sign-definite clearing denominator on a
        sample of times.  The denominator is linear in x, so |h_x| >= b_lower
        on the whole simplex iff the three vertex coefficients share a sign
        and all exceed b_lower in magnitude."""
        for t in np.asarray(times, dtype=np.float64):
            a1, a2, a3, b1, b2, b3, *_ = self.at(float(t))
            if b1 > 0 or b2 > 0 or b3 > 0:
                raise ValueError(f"beta coefficient positive at t={t}")
            c = (a1, a2 * (1.0 + b2), a3 * (1.0 + b3))
            if min(abs(v) for v in c) < self.b_lower or not (all(v > 0 for v in c) or all(v < 0 for v in c)):
                raise DegenerateDenominator(
                    f"clearing denominator can reach |h| < {self.b_lower} at t={t} "
                    f"(vertex coefficients {c})"
                )


def denominator(p: Lux3Params, t: float, x) -> float:
    """Market-clearing denominator h_x(t), linear in the type mix."""
    x1, x2, x3 = _coords(x)
    a1, a2, a3, b1, b2, b3, *_ = p.at(t)
    return x1 * a1 + x2 * a2 * (1.0 + b2) + x3 * a3 * (1.0 + b3)


def reference_levels(p: Lux3Params, k: int, N: int, prev_log_price: float,
                     proposed_log_price: float) -> np.ndarray:
    """Per-type log reference levels at tick k.

    Only the fundamentalist coefficient is divided by N: fundamentalists
    track the fundamental value on the slow time scale, while optimists and
    pessimists react to the proposed price tick by tick.
    """
    t = k / N
    b1 = p.beta[0](t)
    b2 = p.beta[1](t)
    b3 = p.beta[2](t)
    f = p.log_fundamental(t)
    s1 = prev_log_price + (b1 / N) * (prev_log_price - f)
    s2 = prev_log_price + b2 * (prev_log_price - proposed_log_price)
    s3 = prev_log_price + b3 * (prev_log_price - proposed_log_price)
    return np.array([s1, s2, s3])


def excess_demand(p: Lux3Params, i: int, k: int, N: int, prev_log_price: float,
                  proposed_log_price: float) -> float:
    """Per-agent excess demand of type i at the proposed log price:
    alpha_i * (log reference - proposed) + delta_i / N."""
    if not 0 <= i < 3:
        raise ValueError("type index out of range")
    t = k / N
    s = reference_levels(p, k, N, prev_log_price, proposed_log_price)[i]
    return p.alpha[i](t) * (s - proposed_log_price) + p.delta[i](t) / N


def equilibrium_log_price(p: Lux3Params, n: CountVector, k: int, prev_log_price: float) -> float:
    """Log price clearing the market: the unique zero of total excess demand.

    Total excess demand is affine in the proposed log price, so two
    evaluations determine the root.  This is the direct clearing route; it
    must agree with the recursion prev + drift/N to rounding.
    """
    if n.r != 3:
        raise ValueError("three-type market needs r = 3")
    N = n.N

    def total(L: float) -> float:
        return sum(float(n.counts[i]) * excess_demand(p, i, k, N, prev_log_price, L) for i in range(3))

    e0 = total(0.0)
    e1 = total(1.0)
    h = (e0 - e1) / N  # equals the clearing denominator h_x at x = n/N
    if not abs(h) >= p.b_lower:
        raise DegenerateDenominator(
            f"tick {k}: market-clearing denominator {h} below bound {p.b_lower}")
    return e0 / (e0 - e1)


def log_price_drift(p: Lux3Params, t: float, x, q: float) -> float:
    """Closed-form drift of the log price (the g of this market).

    q is a dummy variable of the phi/psi decomposition here: the coefficient
    of q depends only on (t, x).
    """
    x1, x2, x3 = _coords(x)
    a1, a2, a3, b1, b2, b3, d1, d2, d3, f = p.at(t)
    h = x1 * a1 + x2 * a2 * (1.0 + b2) + x3 * a3 * (1.0 + b3)
    if not abs(h) >= p.b_lower:
        raise DegenerateDenominator(f"market-clearing denominator {h} below bound {p.b_lower}")
    return (x1 * a1 * b1 * q + (x1 * d1 + x2 * d2 + x3 * d3 - x1 * a1 * b1 * f)) / h


def phi_psi(p: Lux3Params, t: float, x) -> tuple[float, float]:
    """The (phi, psi) decomposition of the drift: drift = phi*q + psi."""
    x1, x2, x3 = _coords(x)
    a1, a2, a3, b1, b2, b3, d1, d2, d3, f = p.at(t)
    h = x1 * a1 + x2 * a2 * (1.0 + b2) + x3 * a3 * (1.0 + b3)
    if not abs(h) >= p.b_lower:
        raise DegenerateDenominator(f"market-clearing denominator {h} below bound {p.b_lower}")
    return (x1 * a1 * b1 / h, (x1 * d1 + x2 * d2 + x3 * d3 - x1 * a1 * b1 * f) / h)


def mechanism(p: Lux3Params) -> PriceMechanism:
    """Limit price mechanism of this market."""
    return PriceMechanism(
        phi=lambda t, x, q: phi_psi(p, t, x)[0],
        psi=lambda t, x, q: phi_psi(p, t, x)[1],
        drift_fn=lambda t, x, q: log_price_drift(p, t, x, q),
    )


def tick_floor(N: int, t: float) -> float:
    """Floor t to the tick grid k/N, snapping times within 1e-9 ticks of the
    next tick upward (guards floor(N*(k/N)) rounding down a hair)."""
    nt = N * t
    k = math.floor(nt)
    if nt - k > 1.0 - 1e-9:
        k += 1
    return k / N


def mechanism_finite(p: Lux3Params, N: int) -> PriceMechanism:
    """Finite-N mechanism: the limit coefficients sampled at tick times
    (time floored to the tick grid), matching the chain's discretization."""
    return PriceMechanism(
        phi=lambda t, x, q: phi_psi(p, tick_floor(N, t), x)[0],
        psi=lambda t, x, q: phi_psi(p, tick_floor(N, t), x)[1],
        drift_fn=lambda t, x, q: log_price_drift(p, tick_floor(N, t), x, q),
    )


def phi_psi_bound(p: Lux3Params, times) -> float:
    """Certified bound C with |phi|, |psi| <= C over the simplex for the given
    times.  Requires the denominator's vertex coefficients to be sign-definite."""
    c_bound = 0.0
    for t in np.asarray(times, dtype=np.float64):
        a1, a2, a3, b1, b2, b3, d1, d2, d3, f = p.at(float(t))
        c = (a1, a2 * (1.0 + b2), a3 * (1.0 + b3))
        hmin = min(abs(v) for v in c)
        if hmin < p.b_lower or not (all(v > 0 for v in c) or all(v < 0 for v in c)):
            raise DegenerateDenominator(f"denominator not sign-definite at t={t}")
        num_phi = abs(a1 * b1)
        num_psi = max(abs(d1), abs(d2), abs(d3)) + abs(a1 * b1 * f)
        c_bound = max(c_bound, num_phi / hmin, num_psi / hmin)
    return c_bound


def tick_tables(p: Lux3Params, N: int, n_ticks: int) -> dict[str, np.ndarray]:
    """Coefficient tables at tick times k/N, k = 0..n_ticks, for the tick kernel."""
    ts = np.arange(n_ticks + 1, dtype=np.float64) / N
    alpha = np.array([[p.alpha[i](float(t)) for t in ts] for i in range(3)])
    beta = np.array([[p.beta[i](float(t)) for t in ts] for i in range(3)])
    delta = np.array([[p.delta[i](float(t)) for t in ts] for i in range(3)])
    logf = np.array([p.log_fundamental(float(t)) for t in ts])
    return {"alpha": alpha, "beta": beta, "delta": delta, "logf": logf}


# -- stationary points of the joint flow --


@dataclass(frozen=True)
class FixedPointResult:
    """Converged stationary point of the joint mix/price flow.

    q0 may be +-inf only when the mix sits on the x1 = 0 boundary (the
    explosive case).  residual_g is NaN in that case.  within_assumptions is
    False when the standing assumptions (alpha1 != 0, beta1 != 0,
    delta2*delta3 > 0) do not all hold, flagging results outside the
    analyzed regime.
    """

    x0: SimplexPoint
    q0: float
    residual_A: float
    residual_g: float
    iterations: int
    interior: bool
    within_assumptions: bool


def stationary_log_price(p: Lux3Params, x) -> float:
    """Log price at which the drift vanishes for a frozen mix x (constant
    coefficients, evaluated at t = 0).

    On the x1 = 0 boundary the value is the signed-infinity directional
    limit.  Requires alpha1 != 0 and beta1 != 0.
    """
    x1, x2, x3 = _coords(x)
    a1, a2, a3, b1, b2, b3, d1, d2, d3, f = p.at(0.0)
    if a1 == 0.0 or b1 == 0.0:
        raise ValueError("stationary log price needs alpha1 != 0 and beta1 != 0")
    if x1 > 0.0:
        den = x1 * a1 * b1
        return (x1 * a1 * b1 * f - (x1 * d1 + x2 * d2 + x3 * d3)) / den
    boundary_num = -(x2 * d2 + x3 * d3)
    if boundary_num == 0.0:
        raise ValueError(
            "directional limit undefined on the boundary: x2*delta2 + x3*delta3 = 0 "
            "(outside the delta2*delta3 > 0 regime)")
    sign = math.copysign(1.0, boundary_num) * math.copysign(1.0, a1 * b1)
    return math.inf if sign > 0 else -math.inf


def _mat_l1(m: np.ndarray) -> float:
    return float(np.abs(m).sum())


def _rate_extended(A: RateField, x, q: float) -> np.ndarray:
    """Rate matrix at (x, q), extending to q = +-inf by a numerically checked
    large-|q| limit (Cauchy test at Q_LARGE and 10*Q_LARGE)."""
    xc = _coords(x)
    if math.isfinite(q):
        return A.eval(0.0, xc, q).entries
    s = 1.0 if q > 0 else -1.0
    m1 = A.eval(0.0, xc, s * Q_LARGE).entries
    m2 = A.eval(0.0, xc, s * 10.0 * Q_LARGE).entries
    if _mat_l1(m1 - m2) > _CAUCHY_TOL:
        raise ExtensionUnavailable(
            f"rate field has no resolvable limit at q -> {'+' if s > 0 else '-'}inf "
            f"(Cauchy gap {_mat_l1(m1 - m2):.3g})")
    return m1


def _check_unit_rates(a: np.ndarray) -> None:
    # stationary-point analysis assumes I + A is itself stochastic
    r = a.shape[0]
    off = a[~np.eye(r, dtype=bool)]
    if (off < 0).any() or (off > 1).any():
        raise ValueError("off-diagonal rates must lie in [0, 1] for the simplex self-map")
    if (1.0 + np.diagonal(a) < 0).any():
        raise ValueError("I + A must be stochastic: diagonal rates must be >= -1")


def brouwer_map(A: RateField, x: SimplexPoint, p: Lux3Params) -> SimplexPoint:
    """Continuous self-map of the simplex T(x) = A(x, q_x)' x + x whose fixed
    points are the stationary mixes of the flow."""
    q = stationary_log_price(p, x)
    a = _rate_extended(A, x, q)
    _check_unit_rates(a)
    xc = _coords(x)
    return SimplexPoint(a.T @ xc + xc)


def _residual(A: RateField, p: Lux3Params, xc: np.ndarray) -> np.ndarray:
    q = stationary_log_price(p, xc)
    a = _rate_extended(A, xc, q)
    return a.T @ xc


def _newton_polish(A: RateField, p: Lux3Params, x0: np.ndarray, target: float,
                   max_newton: int = 40) -> tuple[np.ndarray, bool]:
    """Newton on the reduced 2-variable system (x3 = 1 - x1 - x2), finite
    difference Jacobian, backtracking to stay inside the simplex."""

    def full(z):
        x = np.array([z[0], z[1], 1.0 - z[0] - z[1]])
        if x.min() < 0.0 or x[0] <= 0.0:
            return None
        return x

    def res2(z):
        x = full(z)
        if x is None:
            return None
        return _residual(A, p, x)[:2]

    z = x0[:2].copy()
    rv = res2(z)
    if rv is None:
        return x0, False
    for _ in range(max_newton):
        x = full(z)
        rfull = _residual(A, p, x)
        if float(np.linalg.norm(rfull)) <= target:
            return x, True
        eps = 1e-7
        jac = np.empty((2, 2))
        for c in range(2):
            zp = z.copy()
            zm = z.copy()
            zp[c] += eps
            zm[c] -= eps
            rp = res2(zp)
            rm = res2(zm)
            if rp is None or rm is None:
                return x, False
            jac[:, c] = (rp - rm) / (2.0 * eps)
        try:
            dz = np.linalg.solve(jac, -rv)
        except np.linalg.LinAlgError:
            return x, False
        # backtrack until the step lands in the simplex and reduces the residual
        lam = 1.0
        base = float(np.linalg.norm(rv))
        for _ in range(50):
            zn = z + lam * dz
            rn = res2(zn)
            if rn is not None and float(np.linalg.norm(rn)) < base:
                break
            lam *= 0.5
        else:
            return full(z), False
        z = zn
        rv = rn
    x = full(z)
    ok = x is not None and float(np.linalg.norm(_residual(A, p, x))) <= target
    return (x if x is not None else x0), ok


def find_fixed_point(A: RateField, p: Lux3Params, x_init: SimplexPoint,
                     tol: float = 1e-10, max_iter: int = 1000) -> FixedPointResult:
    """Locate a stationary mix: damped iteration of the simplex self-map, with
    a Newton polish on the reduced system once the residual is small.

    Existence is guaranteed, uniqueness is not; the result is the first
    converged point from x_init (the CLI exposes multi-start).
    """
    a1 = p.alpha[0](0.0)
    b1 = p.beta[0](0.0)
    if a1 == 0.0 or b1 == 0.0:
        raise ValueError("fixed-point analysis needs alpha1 != 0 and beta1 != 0")
    within = p.delta[1](0.0) * p.delta[2](0.0) > 0.0
    target = max(1e-14, 0.01 * tol)

    xc = np.array(x_init.coords, dtype=np.float64)
    iterations = 0
    converged = False
    for _ in range(max_iter):
        iterations += 1
        q = stationary_log_price(p, xc)
        a = _rate_extended(A, xc, q)
        _check_unit_rates(a)
        res_vec = a.T @ xc
        res = float(np.linalg.norm(res_vec))
        if res <= tol:
            converged = True
            break
        if res < 1e-3 and xc[0] > 0.0 and math.isfinite(q):
            xn, ok = _newton_polish(A, p, xc, target)
            if ok:
                xc = xn
                converged = True
                break
        xc = xc + 0.5 * res_vec  # x <- (1-l) x + l T(x) with l = 1/2
        xc = np.clip(xc, 0.0, None)
        xc = xc / xc.sum()
    if not converged:
        raise NoConvergence(f"fixed-point iteration did not reach tol={tol} in {max_iter} iterations")

    q0 = stationary_log_price(p, xc)
    res_a = float(np.linalg.norm(_rate_extended(A, xc, q0).T @ xc))
    if math.isfinite(q0):
        res_g = abs(log_price_drift(p, 0.0, xc, q0))
    else:
        res_g = math.nan
    return FixedPointResult(
        x0=SimplexPoint(xc),
        q0=q0,
        residual_A=res_a,
        residual_g=res_g,
        iterations=iterations,
        interior=bool(xc[0] > 0.0),
        within_assumptions=bool(within),
    )


def simplex_lattice(mesh: int) -> list[SimplexPoint]:
    """All 3-type mixes with coordinates k/mesh; multi-start grid."""
    pts = []
    for i in range(mesh + 1):
        for j in range(mesh + 1 - i):
            pts.append(SimplexPoint(np.array([i, j, mesh - i - j], dtype=np.float64) / mesh))
    return pts


def multi_start_fixed_points(A: RateField, p: Lux3Params, mesh: int = 4,
                             tol: float = 1e-10, max_iter: int = 1000,
                             dedupe_tol: float = 1e-6) -> list[FixedPointResult]:
    """Run find_fixed_point from every lattice start; return distinct results
    ordered by first discovery.  Starts that fail to converge are skipped."""
    found: list[FixedPointResult] = []
    for x0 in simplex_lattice(mesh):
        try:
            res = find_fixed_point(A, p, x0, tol=tol, max_iter=max_iter)
        except (NoConvergence, ValueError, ExtensionUnavailable):
            continue
        if all(np.abs(res.x0.coords - f.x0.coords).max() > dedupe_tol for f in found):
            found.append(res)
    return found


def closed_form_q_path(p: Lux3Params, x_path, q0: float, grid) -> np.ndarray:
    """Log-price path for a frozen mix path by the integrating-factor formula
    q(t) = e^{I(t)} [ int_0^t psi e^{-I(u)} du + q0 ], I(t) = int_0^t phi,
    with composite-trapezoid quadrature on the supplied grid."""
    ts = np.asarray(grid, dtype=np.float64)
    if ts.ndim != 1 or ts.shape[0] < 2 or not (np.diff(ts) > 0).all():
        raise ValueError("grid must be strictly increasing with at least 2 points")
    if callable(x_path):
        xs = np.array([_coords(x_path(float(t))) for t in ts])
    else:
        xs = np.asarray(x_path, dtype=np.float64)
        if xs.shape != (ts.shape[0], 3):
            raise ValueError("x_path array must have shape (len(grid), 3)")
    coef = np.array([p.at(float(t)) for t in ts])
    a1, a2, a3 = coef[:, 0], coef[:, 1], coef[:, 2]
    b1, b2, b3 = coef[:, 3], coef[:, 4], coef[:, 5]
    d1, d2, d3 = coef[:, 6], coef[:, 7], coef[:, 8]
    f = coef[:, 9]
    x1, x2, x3 = xs[:, 0], xs[:, 1], xs[:, 2]
    h = x1 * a1 + x2 * a2 * (1.0 + b2) + x3 * a3 * (1.0 + b3)
    if not (np.abs(h) >= p.b_lower).all():
        t_bad = float(ts[int(np.abs(h).argmin())])
        raise DegenerateDenominator(f"clearing denominator below bound at t={t_bad}")
    p_x = x1 * a1 * b1 / h
    q_x = (x1 * d1 + x2 * d2 + x3 * d3 - x1 * a1 * b1 * f) / h
    ip = cumulative_trapezoid(p_x, ts, initial=0.0)
    inner = cumulative_trapezoid(q_x * np.exp(-ip), ts, initial=0.0)
    return np.exp(ip) * (inner + q0)
