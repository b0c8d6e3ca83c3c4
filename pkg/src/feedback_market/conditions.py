"""Executable verifiers for the regularity, convergence, growth, containment
and semi-Lipschitz hypotheses behind the fluid limit, plus the exponentially
weighted uniform path metric.

All checkers are lattice-sampled surrogates: they quantify over finite sample
grids and report the worst witness found, never a symbolic certificate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import GridMismatch
from .kernel import RateField
from .lux3 import Lux3Params, closed_form_q_path
from .price import PriceMechanism


@dataclass(frozen=True)
class ConditionReport:
    """Outcome of one condition check; a failing report carries its worst witness."""

    condition: str
    passed: bool
    measured: float
    witness: dict | None = None

    def __post_init__(self):
        if not self.passed and self.witness is None:
            raise ValueError("failing report must carry a witness")

    def text_block(self) -> str:
        lines = [f"[condition {self.condition}]",
                 f"pass = {'true' if self.passed else 'false'}",
                 f"measured = {self.measured:.17g}"]
        if self.witness is None:
            lines.append("witness = none")
        else:
            parts = ", ".join(f"{k}={v}" for k, v in self.witness.items())
            lines.append(f"witness = {parts}")
        return "\n".join(lines)


@dataclass(frozen=True)
class MatrixPath:
    """Matrix-valued path sampled on a time grid, piecewise constant between
    samples (cadlag convention: value at t comes from the last sample <= t)."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        v = np.asarray(self.values, dtype=np.float64)
        if t.ndim != 1 or v.ndim != 3 or v.shape[0] != t.shape[0]:
            raise ValueError("need times (n,) and values (n, r, r)")
        if t.shape[0] < 1 or t[0] != 0.0 or (t.shape[0] > 1 and not (np.diff(t) > 0).all()):
            raise ValueError("grid must start at 0 and increase strictly")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)


def uniform_metric(u: MatrixPath, v: MatrixPath, S: float, hq: float) -> float:
    """Exponentially weighted uniform distance between matrix paths:
    int_0^inf e^{-s} sup_{t<=s} [ ||u-v|| ^ 1 ] ds, truncated at S and
    integrated by composite trapezoid with step <= hq.

    The matrix norm is the entrywise absolute sum.  Truncation error is at
    most e^{-S} since the integrand is capped at 1.
    """
    if S < 1.0:
        raise ValueError("need a truncation horizon S >= 1")
    if hq <= 0:
        raise ValueError("need hq > 0")
    if u.times.shape != v.times.shape or not np.array_equal(u.times, v.times):
        raise GridMismatch("paths are sampled on different grids")
    if u.times[-1] < S and u.times.shape[0] > 1:
        raise GridMismatch(f"path grid ends at {u.times[-1]} and does not cover [0, {S}]")
    diff = np.abs(u.values - v.values).sum(axis=(1, 2))
    capped = np.minimum(diff, 1.0)
    running = np.maximum.accumulate(capped)
    n = int(math.ceil(S / hq))
    s = np.linspace(0.0, S, n + 1)
    idx = np.searchsorted(u.times, s, side="right") - 1
    f = np.exp(-s) * running[idx]
    w = S / n
    return float(w * (f.sum() - 0.5 * (f[0] + f[-1])))


def simplex_lattice(r: int, mesh: int) -> np.ndarray:
    """All points of the r-simplex with coordinates k/mesh."""
    pts: list[tuple[int, ...]] = []

    def rec(prefix, remaining, slots):
        if slots == 1:
            pts.append(prefix + (remaining,))
            return
        for k in range(remaining + 1):
            rec(prefix + (k,), remaining - k, slots - 1)

    rec((), mesh, r)
    return np.array(pts, dtype=np.float64) / mesh


def check_rate_regularity(A: RateField, times: Sequence[float], xs: np.ndarray,
                          qs: Sequence[float], row_tol: float = 1e-12) -> ConditionReport:
    """Sample A over times x mixes x prices and verify zero row sums and
    nonnegative off-diagonal entries."""
    worst = 0.0
    witness = None
    for t in times:
        for x in xs:
            for q in qs:
                a = np.asarray(A.raw(float(t), np.asarray(x, dtype=np.float64), float(q)))
                r = a.shape[0]
                row_err = float(np.abs(a.sum(axis=1)).max())
                off = a[~np.eye(r, dtype=bool)]
                neg_err = float(max(0.0, -off.min())) if off.size else 0.0
                err = max(row_err if row_err > row_tol else 0.0, neg_err)
                if err > worst:
                    worst = err
                    witness = {"t": float(t), "x": np.asarray(x).tolist(), "q": float(q),
                               "value": err}
    return ConditionReport("rate_regularity", passed=(worst == 0.0), measured=worst,
                           witness=witness)


def check_phi_psi_convergence(mechs_N: Sequence[tuple[int, PriceMechanism]],
                              mech: PriceMechanism, times: Sequence[float],
                              xs: np.ndarray, qs: Sequence[float]) -> list[tuple[int, float, float]]:
    """Sup distances |phi_N - phi| and |psi_N - psi| over the sample lattice,
    one row per N; empirical certificate of uniform convergence."""
    rows = []
    for N, mn in mechs_N:
        sup_phi = 0.0
        sup_psi = 0.0
        for t in times:
            for x in xs:
                xa = np.asarray(x, dtype=np.float64)
                for q in qs:
                    sup_phi = max(sup_phi, abs(mn.phi(float(t), xa, float(q)) - mech.phi(float(t), xa, float(q))))
                    sup_psi = max(sup_psi, abs(mn.psi(float(t), xa, float(q)) - mech.psi(float(t), xa, float(q))))
        rows.append((N, sup_phi, sup_psi))
    return rows


@dataclass(frozen=True)
class GrowthFit:
    """Fitted envelope sup|f(t, .)| <= C e^{lambda t} with 5% acceptance slack."""

    C: float
    lam: float
    max_violation: float
    passed: bool


def check_growth_bound(f: Callable[[float, tuple], float], times: Sequence[float],
                       points: Sequence[tuple]) -> GrowthFit:
    """Fit C, lambda by least squares on log sup-values, lift C to the data
    (envelope), clamp lambda >= 0, then test the bound with a 5% slack
    multiplier (max violation must be <= 0)."""
    ts = np.asarray(times, dtype=np.float64)
    sup_vals = np.array([max(abs(f(float(t), pt)) for pt in points) for t in ts])
    pos = sup_vals > 0.0
    if pos.sum() >= 2:
        logm = np.log(sup_vals[pos])
        design = np.column_stack([np.ones(pos.sum()), ts[pos]])
        sol, *_ = np.linalg.lstsq(design, logm, rcond=None)
        logc, lam = float(sol[0]), float(sol[1])
        lam = max(lam, 0.0)
        # lift so the fitted curve is an envelope of the sampled sups
        logc += float(np.max(logm - (logc + lam * ts[pos])))
        c = math.exp(logc)
    else:
        c = float(sup_vals.max()) if sup_vals.max() > 0 else 1.0
        lam = 0.0
    bound = 1.05 * c * np.exp(lam * ts)
    violation = float((sup_vals - bound).max())
    return GrowthFit(C=c, lam=lam, max_violation=violation, passed=(violation <= 0.0))


def check_containment_bound(q_path: Sequence[float], q0: float, C_T: float,
                            N: int) -> ConditionReport:
    """Tick bound |q(k/N)| <= (1 + C_T/N)^k (|q0| + 1) - 1 at every tick."""
    qs = np.asarray(q_path, dtype=np.float64)
    growth = 1.0 + C_T / N
    bounds = growth ** np.arange(qs.shape[0]) * (abs(q0) + 1.0) - 1.0
    excess = np.abs(qs) - bounds
    worst_k = int(excess.argmax())
    worst = float(excess[worst_k])
    ok = worst <= 0.0
    witness = None if ok else {"k": worst_k, "q": float(qs[worst_k]),
                               "bound": float(bounds[worst_k])}
    return ConditionReport("compact_containment", passed=ok, measured=worst, witness=witness)


@dataclass(frozen=True)
class SemiLipschitzEstimate:
    """Empirical constant M with int (q_x - q_xt)^2 <= M int ||x - xt||^2, plus
    the smallest clearing denominator met (proximity-to-degeneracy flag)."""

    M: float
    min_abs_denominator: float


def estimate_semi_lipschitz_M(p: Lux3Params, path_pairs, grid, q0: float) -> SemiLipschitzEstimate:
    """Max over path pairs and s in (0, T] of the integrated-square ratio of
    price-path to mix-path discrepancies; both integrals by trapezoid, with
    the 0/0 convention mapped to 0."""
    ts = np.asarray(grid, dtype=np.float64)
    worst = 0.0
    min_h = math.inf
    for xa_path, xb_path in path_pairs:
        if callable(xa_path):
            xa = np.array([np.asarray(getattr(xa_path(float(t)), "coords", xa_path(float(t)))) for t in ts])
        else:
            xa = np.asarray(xa_path, dtype=np.float64)
        if callable(xb_path):
            xb = np.array([np.asarray(getattr(xb_path(float(t)), "coords", xb_path(float(t)))) for t in ts])
        else:
            xb = np.asarray(xb_path, dtype=np.float64)
        qa = closed_form_q_path(p, xa, q0, ts)
        qb = closed_form_q_path(p, xb, q0, ts)
        for x in (xa, xb):
            coef = np.array([p.at(float(t)) for t in ts])
            h = (x[:, 0] * coef[:, 0] + x[:, 1] * coef[:, 1] * (1.0 + coef[:, 4])
                 + x[:, 2] * coef[:, 2] * (1.0 + coef[:, 5]))
            min_h = min(min_h, float(np.abs(h).min()))
        num = cumulative_trapezoid((qa - qb) ** 2, ts, initial=0.0)
        den = cumulative_trapezoid(((xa - xb) ** 2).sum(axis=1), ts, initial=0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.where(den > 0.0, num / den, 0.0)
        worst = max(worst, float(ratios[1:].max()) if ratios.shape[0] > 1 else 0.0)
    return SemiLipschitzEstimate(M=worst, min_abs_denominator=min_h)
