"""End-to-end simulation of the N-agent chain, Monte Carlo replication, and
the empirical finite-N vs fluid-limit convergence study.

Replicas run on independent counter-based streams and are merged in replica
order, so results are byte-identical across thread counts.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from . import _backend, lux3
from .core import CountVector, MarketState, SimplexPoint, Trajectory
from .errors import ScenarioError
from .kernel import RateField, StepStream, build_transition, conditional_mean, \
    conditional_squared_increment, step_counts
from .limit import DriftField, integrate_limit
from .price import PriceMechanism, price_step
from .rng import INIT_STEP

THREADS_ENV = "FEEDBACK_MARKET_THREADS"


@dataclass(frozen=True)
class CheckSettings:
    """Sample-lattice resolution and tolerances for the condition checkers."""

    simplex_mesh: int = 32
    q_min: float = -5.0
    q_max: float = 5.0
    q_points: int = 41
    time_points: int = 1000
    b_lower: float = 1e-9

    def q_grid(self) -> np.ndarray:
        return np.linspace(self.q_min, self.q_max, self.q_points)


@dataclass(frozen=True)
class InitialLaw:
    """Initial distribution of Y^N(0): a deterministic rounding of N*point or
    an i.i.d. type assignment drawn from point; q0 is deterministic."""

    kind: str  # "deterministic" | "multinomial"
    point: np.ndarray
    q0: float

    def __post_init__(self):
        if self.kind not in ("deterministic", "multinomial"):
            raise ScenarioError(f"unknown initial law {self.kind!r}")
        pt = np.asarray(self.point, dtype=np.float64)
        SimplexPoint(pt)  # validate
        object.__setattr__(self, "point", pt)

    def counts_for(self, N: int, seed: int, replica: int) -> np.ndarray:
        if self.kind == "multinomial":
            return _backend.multinomial_draw(N, self.point, seed, replica, INIT_STEP, 0)
        # deterministic: largest-remainder rounding of N * point
        raw = self.point * N
        base = np.floor(raw).astype(np.int64)
        short = N - int(base.sum())
        if short:
            order = np.argsort(-(raw - base), kind="stable")
            base[order[:short]] += 1
        return base


@dataclass(frozen=True)
class Scenario:
    """Complete experiment description (model, population, run parameters)."""

    r: int
    n_values: tuple[int, ...]
    T: float
    h: float
    seed: int
    replicas: int
    rate: RateField
    mech_kind: str  # "affine" | "lux3"
    initial: InitialLaw
    affine_phi: Callable[[float], float] | None = None
    affine_psi: Callable[[float], float] | None = None
    lux_params: lux3.Lux3Params | None = None
    checks: CheckSettings = field(default_factory=CheckSettings)

    def __post_init__(self):
        if self.r < 2:
            raise ScenarioError("need r >= 2")
        if not self.n_values or any(n < 2 for n in self.n_values):
            raise ScenarioError("population sizes must be >= 2")
        if any(b <= a for a, b in zip(self.n_values, self.n_values[1:])):
            raise ScenarioError("population sizes must be strictly increasing")
        if self.T <= 0 or self.h <= 0:
            raise ScenarioError("T and h must be positive")
        if self.replicas < 1:
            raise ScenarioError("need at least one replica")
        if not 0 <= self.seed < 2 ** 64:
            raise ScenarioError("seed must fit in 64 bits")
        if self.initial.point.shape[0] != self.r:
            raise ScenarioError("initial point dimension does not match r")
        if self.mech_kind == "lux3":
            if self.lux_params is None:
                raise ScenarioError("lux3 mechanism needs lux3 parameters")
            if self.r != 3:
                raise ScenarioError("lux3 mechanism needs r = 3")
        elif self.mech_kind == "affine":
            if self.affine_phi is None or self.affine_psi is None:
                raise ScenarioError("affine mechanism needs phi and psi profiles")
        else:
            raise ScenarioError(f"unknown mechanism {self.mech_kind!r}")

    def limit_mechanism(self) -> PriceMechanism:
        if self.mech_kind == "lux3":
            return lux3.mechanism(self.lux_params)
        return PriceMechanism.affine(self.affine_phi, self.affine_psi)

    def finite_mechanism(self, N: int) -> PriceMechanism:
        """g_N obtained from g by flooring time to the tick grid."""
        if self.mech_kind == "lux3":
            return lux3.mechanism_finite(self.lux_params, N)
        phi, psi = self.affine_phi, self.affine_psi
        return PriceMechanism.affine(
            lambda t: phi(lux3.tick_floor(N, t)),
            lambda t: psi(lux3.tick_floor(N, t)),
        )

    def drift_field(self) -> DriftField:
        return DriftField(rate=self.rate, mech=self.limit_mechanism())

    def certified_price_bound(self) -> float:
        """C_T bounding |phi_N| and |psi_N| over [0, T] x simplex, used by the
        containment check."""
        ticks = np.linspace(0.0, self.T, self.checks.time_points + 1)
        if self.mech_kind == "lux3":
            return lux3.phi_psi_bound(self.lux_params, ticks)
        return max(max(abs(self.affine_phi(float(t))), abs(self.affine_psi(float(t)))) for t in ticks)


def n_workers(replicas: int) -> int:
    env = os.environ.get(THREADS_ENV)
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(cap, replicas))


def _map_ordered(fn: Callable[[int], object], count: int) -> list:
    w = n_workers(count)
    if w == 1:
        return [fn(j) for j in range(count)]
    with ThreadPoolExecutor(max_workers=w) as ex:
        return list(ex.map(fn, range(count)))


def _chain_raw(s: Scenario, N: int, replica: int) -> tuple[np.ndarray, np.ndarray]:
    """Counts/price paths via the backend tick kernel."""
    spec = s.rate.kernel_spec
    if spec is None:
        return _chain_generic(s, N, replica)
    n_ticks = int(math.floor(N * s.T))
    counts0 = s.initial.counts_for(N, s.seed, replica)
    zeros2 = np.zeros((1, 1))
    zeros1 = np.zeros(1)
    if s.mech_kind == "affine":
        tick_t = np.arange(n_ticks + 1, dtype=np.float64) / N
        phi_tab = np.array([s.affine_phi(float(t)) for t in tick_t])
        psi_tab = np.array([s.affine_psi(float(t)) for t in tick_t])
        return _backend.simulate_chain(
            counts0, s.initial.q0, N, n_ticks, s.seed, replica,
            spec.mode, spec.a_lo, spec.a_hi if spec.a_hi is not None else zeros2,
            spec.q_mid, spec.q_scale,
            _backend.MECH_AFFINE, phi_tab, psi_tab,
            zeros2, zeros2, zeros2, zeros1, 0.0)
    tabs = lux3.tick_tables(s.lux_params, N, n_ticks)
    return _backend.simulate_chain(
        counts0, s.initial.q0, N, n_ticks, s.seed, replica,
        spec.mode, spec.a_lo, spec.a_hi if spec.a_hi is not None else zeros2,
        spec.q_mid, spec.q_scale,
        _backend.MECH_LUX3, zeros1, zeros1,
        tabs["alpha"], tabs["beta"], tabs["delta"], tabs["logf"],
        s.lux_params.b_lower)


def _chain_generic(s: Scenario, N: int, replica: int) -> tuple[np.ndarray, np.ndarray]:
    """Tick loop through the public per-operation API; used for rate fields
    without a kernel description.  Identical stream consumption."""
    mech_n = s.finite_mechanism(N)
    n_ticks = int(math.floor(N * s.T))
    counts = CountVector(s.initial.counts_for(N, s.seed, replica))
    q = float(s.initial.q0)
    counts_path = np.empty((n_ticks + 1, s.r), dtype=np.int64)
    q_path = np.empty(n_ticks + 1)
    counts_path[0] = counts.counts
    q_path[0] = q
    for k in range(n_ticks):
        x = counts.counts / float(N)
        a = s.rate.eval(k / N, x, q)
        P = build_transition(a, N)
        counts = step_counts(counts, P, StepStream(seed=s.seed, replica=replica, step=k))
        x_next = counts.counts / float(N)
        q = price_step(q, (k + 1) / N, x_next, mech_n, N)
        counts_path[k + 1] = counts.counts
        q_path[k + 1] = q
    return counts_path, q_path


def simulate_market(s: Scenario, N: int, replica: int) -> Trajectory:
    """Simulate one replica of the N-agent chain over ticks k/N, k <= floor(NT).

    Deterministic given (seed, replica): counts update first with the tick's
    transition matrix, then the log price advances with the new mix and the
    old price.
    """
    counts_path, q_path = _chain_raw(s, N, replica)
    n_ticks = counts_path.shape[0] - 1
    times = np.arange(n_ticks + 1, dtype=np.float64) / N
    return Trajectory(times=times, xs=counts_path / float(N), qs=q_path, counts=counts_path)


@dataclass(frozen=True)
class ConvergenceRow:
    N: int
    replicas: int
    mean_sup_error: float
    std_error: float


@dataclass(frozen=True)
class ConvergenceTable:
    rows: tuple[ConvergenceRow, ...]

    def __post_init__(self):
        ns = [row.N for row in self.rows]
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ValueError("rows must be strictly increasing in N")

    def is_decreasing_within(self, z: float = 2.0) -> bool:
        """Mean errors strictly decreasing beyond z combined standard errors."""
        for a, b in zip(self.rows, self.rows[1:]):
            slack = z * math.hypot(a.std_error, b.std_error)
            if not b.mean_sup_error < a.mean_sup_error - slack:
                return False
        return True

    def loglog_slope(self) -> float:
        ns = np.log([row.N for row in self.rows])
        es = np.log([row.mean_sup_error for row in self.rows])
        design = np.column_stack([np.ones_like(ns), ns])
        sol, *_ = np.linalg.lstsq(design, es, rcond=None)
        return float(sol[1])


def limit_reference(s: Scenario) -> Trajectory:
    """Fluid-limit trajectory the chains are compared against."""
    y0 = MarketState(SimplexPoint(s.initial.point), s.initial.q0)
    return integrate_limit(s.drift_field(), y0, s.T, s.h)


def convergence_study(s: Scenario) -> ConvergenceTable:
    """For each N: mean +- standard error over replicas of the sup-norm gap
    between the chain path and the fluid limit (cubic interpolation of the
    dense ODE grid to tick times)."""
    ref = limit_reference(s)
    comps = np.column_stack([ref.xs, ref.qs])
    spline = CubicSpline(ref.times, comps, axis=0)

    rows = []
    for N in s.n_values:
        def sup_err(replica: int, N=N) -> float:
            traj = simulate_market(s, N, replica)
            ref_at_ticks = spline(traj.times)
            sim = np.column_stack([traj.xs, traj.qs])
            return float(np.linalg.norm(sim - ref_at_ticks, axis=1).max())

        errs = np.array(_map_ordered(sup_err, s.replicas))
        mean = float(errs.mean())
        se = float(errs.std(ddof=1) / math.sqrt(s.replicas)) if s.replicas > 1 else 0.0
        rows.append(ConvergenceRow(N=N, replicas=s.replicas, mean_sup_error=mean, std_error=se))
    return ConvergenceTable(rows=tuple(rows))


@dataclass(frozen=True)
class MomentCheck:
    name: str
    coordinate: int
    empirical: float
    exact: float
    std_error: float
    passed: bool


@dataclass(frozen=True)
class MomentReport:
    N: int
    tick: int
    replicas: int
    counts: np.ndarray
    q: float
    checks: tuple[MomentCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def moment_test(s: Scenario, N: int, k: int, replicas: int, z: float = 4.0) -> MomentReport:
    """Empirical conditional mean and squared increment at tick k against the
    closed-form oracles, conditioned on the realized state of a base path.

    The base path runs as replica 0; the paired one-step resamples use
    replica indices 1..replicas at the same (seed, step), so they are fresh
    draws from the same conditioning state.
    """
    n_ticks = int(math.floor(N * s.T))
    if not 0 <= k < n_ticks:
        raise ValueError(f"tick {k} outside the horizon (0..{n_ticks - 1})")
    counts_path, q_path = _chain_raw(s, N, 0)
    counts_k = CountVector(counts_path[k])
    q_k = float(q_path[k])
    x_k = counts_path[k] / float(N)
    a = s.rate.eval(k / N, x_k, q_k)
    P = build_transition(a, N)
    draws = _backend.sample_steps(counts_k.counts, P.entries, s.seed, k, replicas, 1)

    mean_exact = conditional_mean(counts_k, P)
    checks: list[MomentCheck] = []
    for i in range(s.r):
        col = draws[:, i].astype(np.float64)
        emp = float(col.mean())
        se = float(col.std(ddof=1) / math.sqrt(replicas))
        ok = abs(emp - mean_exact[i]) <= z * se if se > 0 else emp == mean_exact[i]
        checks.append(MomentCheck("conditional_mean", i, emp, float(mean_exact[i]), se, bool(ok)))
    for i in range(s.r):
        sq = (draws[:, i].astype(np.float64) - float(counts_k.counts[i])) ** 2
        emp = float(sq.mean())
        se = float(sq.std(ddof=1) / math.sqrt(replicas))
        exact = conditional_squared_increment(counts_k, P, i)
        ok = abs(emp - exact) <= z * se if se > 0 else emp == exact
        checks.append(MomentCheck("squared_increment", i, emp, exact, se, bool(ok)))
    return MomentReport(N=N, tick=k, replicas=replicas, counts=counts_path[k],
                        q=q_k, checks=tuple(checks))
