"""Finite-N transition structure: P_N = I + A/N, multinomial tick sampling,
and exact enumeration/moment oracles used to test the sampler.

Sampling is delegated to the selected backend (compiled extension or its
pure-Python twin); this module owns the validated value types and the
oracles, which stay independent of the sampling path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _backend
from .core import CountVector
from .errors import NotStochastic, TooLarge

ROW_SUM_TOL = 1e-12
ENUMERATION_BUDGET = 10**6


class RateMatrixValue:
    """Pointwise value of a rate matrix: zero row sums, nonnegative off-diagonal.

    Row sums within 1e-12 of zero are repaired by adjusting the diagonal
    (float noise); larger violations are modeling bugs and raise.
    """

    __slots__ = ("entries",)

    def __init__(self, entries):
        a = np.array(entries, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 2:
            raise ValueError("rate matrix must be square with r >= 2")
        r = a.shape[0]
        off = a[~np.eye(r, dtype=bool)]
        if (off < 0).any():
            raise ValueError("rate matrix off-diagonal entries must be nonnegative")
        sums = a.sum(axis=1)
        if (np.abs(sums) > ROW_SUM_TOL).any():
            worst = int(np.abs(sums).argmax())
            raise ValueError(f"rate matrix row {worst} sums to {sums[worst]}, beyond repair tolerance")
        a[np.arange(r), np.arange(r)] -= sums
        a.flags.writeable = False
        object.__setattr__(self, "entries", a)

    @property
    def r(self) -> int:
        return self.entries.shape[0]

    def __setattr__(self, name, value):
        raise AttributeError("RateMatrixValue is immutable")

    def __repr__(self):
        return f"RateMatrixValue({self.entries.tolist()})"


@dataclass(frozen=True)
class KernelRateSpec:
    """Description of a rate field the compiled tick loop can evaluate itself."""

    mode: int
    a_lo: np.ndarray
    a_hi: np.ndarray | None = None
    q_mid: float = 0.0
    q_scale: float = 1.0


def _coords(x) -> np.ndarray:
    return np.asarray(getattr(x, "coords", x), dtype=np.float64)


@dataclass(frozen=True)
class RateField:
    """Time/state-dependent rate matrix A(t, x, q).

    raw returns a plain ndarray; eval wraps it in a validated RateMatrixValue.
    kernel_spec, when set, lets the harness run the field inside the compiled
    tick loop.
    """

    raw: Callable[[float, np.ndarray, float], np.ndarray]
    kernel_spec: KernelRateSpec | None = field(default=None, compare=False)

    def eval(self, t: float, x, q: float) -> RateMatrixValue:
        return RateMatrixValue(self.raw(t, _coords(x), q))

    @staticmethod
    def zero(r: int) -> "RateField":
        return RateField.constant(np.zeros((r, r)))

    @staticmethod
    def constant(matrix) -> "RateField":
        a = np.array(matrix, dtype=np.float64)
        RateMatrixValue(a)  # validate once up front
        a.flags.writeable = False
        return RateField(
            raw=lambda t, x, q: a,
            kernel_spec=KernelRateSpec(mode=_backend.RATE_CONSTANT, a_lo=a),
        )

    @staticmethod
    def logistic_blend(a_lo, a_hi, q_mid: float = 0.0, q_scale: float = 1.0) -> "RateField":
        """Blend A = A_lo + s(q) (A_hi - A_lo) with logistic s; the q -> ±inf
        limits are A_lo and A_hi, so the extended field exists."""
        lo = np.array(a_lo, dtype=np.float64)
        hi = np.array(a_hi, dtype=np.float64)
        RateMatrixValue(lo)
        RateMatrixValue(hi)
        if q_scale <= 0:
            raise ValueError("q_scale must be positive")
        lo.flags.writeable = False
        hi.flags.writeable = False

        def raw(t, x, q):
            s = 1.0 / (1.0 + math.exp(-(q - q_mid) / q_scale))
            return lo + s * (hi - lo)

        return RateField(
            raw=raw,
            kernel_spec=KernelRateSpec(
                mode=_backend.RATE_LOGISTIC, a_lo=lo, a_hi=hi, q_mid=q_mid, q_scale=q_scale
            ),
        )


class StochasticMatrix:
    """Row-stochastic matrix: entries in [0, 1], rows summing to 1 within 1e-12."""

    __slots__ = ("entries",)

    def __init__(self, entries):
        p = np.array(entries, dtype=np.float64)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ValueError("stochastic matrix must be square")
        if (p < -ROW_SUM_TOL).any() or (p > 1.0 + ROW_SUM_TOL).any():
            raise ValueError("stochastic matrix entries must lie in [0, 1]")
        sums = p.sum(axis=1)
        if (np.abs(sums - 1.0) > ROW_SUM_TOL).any():
            worst = int(np.abs(sums - 1.0).argmax())
            raise ValueError(f"stochastic matrix row {worst} sums to {sums[worst]}")
        p.flags.writeable = False
        object.__setattr__(self, "entries", p)

    @property
    def r(self) -> int:
        return self.entries.shape[0]

    def __setattr__(self, name, value):
        raise AttributeError("StochasticMatrix is immutable")


def build_transition(a: RateMatrixValue, N: int) -> StochasticMatrix:
    """One-tick transition matrix I + A/N.

    Raises NotStochastic when some diagonal 1 + a_ii/N is negative, i.e. N is
    too small for the given rates.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    p = np.eye(a.r) + a.entries / float(N)
    d = np.diagonal(p)
    if (d < 0).any():
        i = int(d.argmin())
        raise NotStochastic(f"diagonal entry 1 + a[{i}][{i}]/N = {d[i]} < 0 (N={N} too small)")
    return StochasticMatrix(p)


@dataclass(frozen=True)
class StepStream:
    """Identifies the random stream cell of one chain tick."""

    seed: int
    replica: int = 0
    step: int = 0


def step_counts(n: CountVector, P: StochasticMatrix, stream: StepStream) -> CountVector:
    """One multinomial tick: each type's cohort transitions independently by
    its row of P.  Output always sums to N.  Deterministic given the stream."""
    if P.r != n.r:
        raise ValueError("transition matrix size does not match count vector")
    out = _backend.step_counts_raw(n.counts, P.entries, stream.seed, stream.replica, stream.step)
    return CountVector(out)


def sample_steps(n: CountVector, P: StochasticMatrix, seed: int, step: int,
                 n_samples: int, replica0: int = 0) -> np.ndarray:
    """Batch of independent one-tick transitions (one replica index each)."""
    if P.r != n.r:
        raise ValueError("transition matrix size does not match count vector")
    return _backend.sample_steps(n.counts, P.entries, seed, step, n_samples, replica0)


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for rest in _compositions(total - head, parts - 1):
            yield (head,) + rest


def enumeration_cost(n: CountVector) -> int:
    cost = 1
    for ni in n.counts:
        cost *= math.comb(int(ni) + n.r - 1, n.r - 1)
    return cost


def enumerate_one_step(n: CountVector, P: StochasticMatrix) -> dict[tuple[int, ...], float]:
    """Exact one-tick distribution by convolving the per-type multinomials.

    Feasible only for small instances; the support-size budget guards it.
    """
    if P.r != n.r:
        raise ValueError("transition matrix size does not match count vector")
    cost = enumeration_cost(n)
    if cost > ENUMERATION_BUDGET:
        raise TooLarge(f"enumeration support {cost} exceeds budget {ENUMERATION_BUDGET}")
    r = n.r
    dist: dict[tuple[int, ...], float] = {(0,) * r: 1.0}
    for i in range(r):
        ni = int(n.counts[i])
        if ni == 0:
            continue
        row = P.entries[i]
        fact_ni = math.factorial(ni)
        layer: list[tuple[tuple[int, ...], float]] = []
        for comp in _compositions(ni, r):
            coef = fact_ni
            for kj in comp:
                coef //= math.factorial(kj)
            prob = float(coef)
            for kj, pj in zip(comp, row):
                if kj:
                    prob *= pj ** kj
            if prob > 0.0:
                layer.append((comp, prob))
        new_dist: dict[tuple[int, ...], float] = {}
        for base, pb in dist.items():
            for comp, pc in layer:
                key = tuple(b + c for b, c in zip(base, comp))
                new_dist[key] = new_dist.get(key, 0.0) + pb * pc
        dist = new_dist
    return dist


def conditional_mean(n: CountVector, P: StochasticMatrix) -> np.ndarray:
    """E[counts' | counts] = counts @ P."""
    return n.counts.astype(np.float64) @ P.entries


def conditional_squared_increment(n: CountVector, P: StochasticMatrix, i: int) -> float:
    """Closed form for E[(counts'_i - counts_i)^2 | counts] (0-based type index).

    Derived from the factorial moment E[n'_i (n'_i - 1)] = (n P_{.,i})^2
    - sum_j p_{ji}^2 n_j of the independent multinomial mixture.
    """
    if not 0 <= i < n.r:
        raise ValueError("type index out of range")
    nv = n.counts.astype(np.float64)
    col = P.entries[:, i]
    m1 = float(nv @ col)
    ni = float(n.counts[i])
    return m1 * m1 + m1 - float(nv @ (col * col)) - 2.0 * m1 * ni + ni * ni
