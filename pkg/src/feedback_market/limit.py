"""Deterministic fluid limit: drift field, classical RK4 integration of
dx/dt = A'x, dq/dt = g, and the integral-form (Volterra) residual check."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .core import MarketState, Trajectory
from .errors import SimplexEscape
from .kernel import RateField
from .price import PriceMechanism

# Per-step renormalization beyond this magnitude signals a bad step size or field.
RENORM_BUDGET = 1e-6


@dataclass(frozen=True)
class DriftField:
    """Joint drift of the limit flow: mix part x @ A(t, x, q), price part g."""

    rate: RateField
    mech: PriceMechanism


def drift_raw(d: DriftField, t: float, x: np.ndarray, q: float) -> np.ndarray:
    """Drift at raw coordinates (used by integrator stages, no state validation)."""
    a = d.rate.eval(t, x, q).entries
    bx = x @ a
    return np.concatenate([bx, [d.mech.drift(t, x, q)]])


def drift(d: DriftField, t: float, y: MarketState) -> np.ndarray:
    """Length r+1 drift vector at a market state; the first r components sum
    to zero because the rate rows do."""
    return drift_raw(d, t, y.x.coords, y.q)


def integrate_limit(d: DriftField, y0: MarketState, T: float, h: float) -> Trajectory:
    """Classical 4th-order one-step integration on a uniform grid of step ~h.

    Each step clamps negative mix coordinates and rescales to unit sum,
    recording the correction; a correction beyond RENORM_BUDGET raises
    SimplexEscape.
    """
    if h <= 0 or T < 0:
        raise ValueError("need h > 0 and T >= 0")
    n = max(1, int(round(T / h)))
    dt = T / n
    r = y0.x.r
    times = np.arange(n + 1) * dt
    xs = np.empty((n + 1, r))
    qs = np.empty(n + 1)
    x = np.array(y0.x.coords)
    q = float(y0.q)
    xs[0] = x
    qs[0] = q
    for k in range(n):
        t = times[k]
        y = np.concatenate([x, [q]])
        k1 = drift_raw(d, t, y[:r], y[r])
        y2 = y + (dt / 2.0) * k1
        k2 = drift_raw(d, t + dt / 2.0, y2[:r], y2[r])
        y3 = y + (dt / 2.0) * k2
        k3 = drift_raw(d, t + dt / 2.0, y3[:r], y3[r])
        y4 = y + dt * k3
        k4 = drift_raw(d, t + dt, y4[:r], y4[r])
        yn = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        x_raw = yn[:r]
        x_fix = np.clip(x_raw, 0.0, None)
        x_fix = x_fix / x_fix.sum()
        corr = float(np.abs(x_fix - x_raw).max())
        if corr > RENORM_BUDGET:
            raise SimplexEscape(
                f"step {k}: simplex correction {corr:.3g} exceeds budget {RENORM_BUDGET:.0e} "
                "(step size too large or field invalid)")
        x = x_fix
        q = float(yn[r])
        xs[k + 1] = x
        qs[k + 1] = q
    return Trajectory(times=times, xs=xs, qs=qs)


def volterra_residual(d: DriftField, traj: Trajectory) -> float:
    """Max over grid times of || y(t) - y(0) - int_0^t b(s, y(s)) ds ||, the
    defect of the trajectory in the integral form of the limit equations
    (composite trapezoid)."""
    ts = traj.times
    if ts.shape[0] < 2:
        return 0.0
    steps = np.diff(ts)
    if np.abs(steps - steps[0]).max() > 1e-9 * max(steps[0], 1.0):
        raise ValueError("volterra_residual needs a uniform grid")
    ys = np.column_stack([traj.xs, traj.qs])
    b = np.empty_like(ys)
    for i in range(ts.shape[0]):
        b[i] = drift_raw(d, float(ts[i]), traj.xs[i], float(traj.qs[i]))
    integral = cumulative_trapezoid(b, ts, axis=0, initial=0.0)
    defect = ys - ys[0] - integral
    return float(np.linalg.norm(defect, axis=1).max())
