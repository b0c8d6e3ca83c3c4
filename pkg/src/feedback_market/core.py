"""Domain value types: count vectors, simplex points, market states, trajectories.

All types are immutable after construction (arrays are frozen), so instances
can be shared freely across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

SIMPLEX_TOL = 1e-12
# Looser budget for states produced by ODE integration (accumulated drift).
SIMPLEX_TOL_ODE = 1e-9


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class SimplexViolation:
    """Outcome of validate_simplex: which invariant failed and by how much."""

    ok: bool
    negative_indices: tuple[int, ...]
    worst_negative: float
    sum_violation: float

    def __str__(self) -> str:
        if self.ok:
            return "ok"
        parts = []
        if self.negative_indices:
            parts.append(f"negativity violation at index {self.negative_indices[0]} "
                         f"(worst {self.worst_negative:.3g})")
        if self.sum_violation > 0:
            parts.append(f"sum violation {self.sum_violation:.3g}")
        return "; ".join(parts)


def validate_simplex(coords: Sequence[float], tol: float = SIMPLEX_TOL) -> SimplexViolation:
    """Check nonnegativity and unit sum of a candidate simplex point."""
    c = np.asarray(coords, dtype=np.float64)
    neg = np.where(c < -tol)[0]
    worst = float(-c.min()) if neg.size else 0.0
    sum_err = abs(float(c.sum()) - 1.0)
    sum_bad = sum_err > tol
    return SimplexViolation(
        ok=(neg.size == 0 and not sum_bad),
        negative_indices=tuple(int(i) for i in neg),
        worst_negative=worst,
        sum_violation=sum_err if sum_bad else 0.0,
    )


class SimplexPoint:
    """Point of the probability simplex over r types."""

    __slots__ = ("coords",)

    def __init__(self, coords: Sequence[float], tol: float = SIMPLEX_TOL):
        c = np.asarray(coords, dtype=np.float64)
        if c.ndim != 1 or c.shape[0] < 2:
            raise ValueError("simplex point needs at least 2 coordinates")
        report = validate_simplex(c, tol)
        if not report.ok:
            raise ValueError(f"invalid simplex point: {report}")
        object.__setattr__(self, "coords", _frozen(c))

    @property
    def r(self) -> int:
        return self.coords.shape[0]

    def __setattr__(self, name, value):
        raise AttributeError("SimplexPoint is immutable")

    def __eq__(self, other):
        return isinstance(other, SimplexPoint) and np.array_equal(self.coords, other.coords)

    def __repr__(self):
        return f"SimplexPoint({self.coords.tolist()})"


class CountVector:
    """Occupancy of N agents over r types; counts sum to N, N >= 2, r >= 2."""

    __slots__ = ("counts", "N", "r")

    def __init__(self, counts: Sequence[int]):
        c = np.asarray(counts, dtype=np.int64)
        if c.ndim != 1 or c.shape[0] < 2:
            raise ValueError("count vector needs at least 2 types")
        if (c < 0).any():
            raise ValueError("counts must be nonnegative")
        total = int(c.sum())
        if total < 2:
            raise ValueError("population must have N >= 2 agents")
        object.__setattr__(self, "counts", _frozen(c))
        object.__setattr__(self, "N", total)
        object.__setattr__(self, "r", int(c.shape[0]))

    def __setattr__(self, name, value):
        raise AttributeError("CountVector is immutable")

    def __eq__(self, other):
        return isinstance(other, CountVector) and np.array_equal(self.counts, other.counts)

    def __repr__(self):
        return f"CountVector({self.counts.tolist()})"


def normalize_counts(n: CountVector) -> SimplexPoint:
    """Empirical distribution counts/N of a count vector."""
    return SimplexPoint(n.counts / n.N)


@dataclass(frozen=True)
class MarketState:
    """Joint state: type mix x plus log equilibrium price q (log units)."""

    x: SimplexPoint
    q: float

    def __post_init__(self):
        if not np.isfinite(self.q):
            raise ValueError("market state requires a finite log price")

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.x.coords, [self.q]])


@dataclass(frozen=True)
class Trajectory:
    """Discretized path: strictly increasing time grid plus per-time states.

    xs has one row per grid point, qs one entry; states() materializes
    MarketState values on demand.
    """

    times: np.ndarray
    xs: np.ndarray
    qs: np.ndarray
    counts: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        xs = np.asarray(self.xs, dtype=np.float64)
        qs = np.asarray(self.qs, dtype=np.float64)
        if t.ndim != 1 or xs.ndim != 2 or qs.ndim != 1:
            raise ValueError("trajectory arrays have wrong rank")
        if not (t.shape[0] == xs.shape[0] == qs.shape[0]):
            raise ValueError("trajectory arrays must share their first dimension")
        if t.shape[0] == 0:
            raise ValueError("trajectory must be nonempty")
        if t.shape[0] > 1 and not (np.diff(t) > 0).all():
            raise ValueError("trajectory grid must be strictly increasing")
        if not np.isfinite(qs).all():
            raise ValueError("trajectory log prices must be finite")
        object.__setattr__(self, "times", _frozen(t))
        object.__setattr__(self, "xs", _frozen(xs))
        object.__setattr__(self, "qs", _frozen(qs))
        if self.counts is not None:
            object.__setattr__(self, "counts", _frozen(np.asarray(self.counts, dtype=np.int64)))

    @property
    def r(self) -> int:
        return self.xs.shape[1]

    def __len__(self) -> int:
        return self.times.shape[0]

    def state(self, i: int, tol: float = SIMPLEX_TOL_ODE) -> MarketState:
        return MarketState(SimplexPoint(self.xs[i], tol=tol), float(self.qs[i]))

    def states(self, tol: float = SIMPLEX_TOL_ODE) -> list[MarketState]:
        return [self.state(i, tol) for i in range(len(self))]
