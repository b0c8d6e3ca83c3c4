"""Recursive log-price mechanism: drift g = phi*q + psi and the one-tick update."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


def _coords(x) -> np.ndarray:
    return np.asarray(getattr(x, "coords", x), dtype=np.float64)


@dataclass(frozen=True)
class PriceMechanism:
    """Linear-in-log-price drift: g(t, x, q) = phi(t, x, q) * q + psi(t, x, q).

    phi and psi are kept separate because bounds and convergence conditions
    are stated on them individually.  drift_fn, when set, is an algebraically
    equal closed form of phi*q + psi evaluated as a single expression (the
    market's displayed drift); it is what the tick loop uses.
    affine_profiles, when set, marks a mechanism whose phi/psi depend on t
    only, so the compiled tick loop can tabulate them.
    """

    phi: Callable[[float, np.ndarray, float], float]
    psi: Callable[[float, np.ndarray, float], float]
    drift_fn: Callable[[float, np.ndarray, float], float] | None = field(
        default=None, compare=False
    )
    affine_profiles: tuple[Callable[[float], float], Callable[[float], float]] | None = field(
        default=None, compare=False
    )

    def drift(self, t: float, x, q: float) -> float:
        xc = _coords(x)
        if self.drift_fn is not None:
            return self.drift_fn(t, xc, q)
        return self.phi(t, xc, q) * q + self.psi(t, xc, q)

    @staticmethod
    def affine(phi_of_t: Callable[[float], float], psi_of_t: Callable[[float], float]) -> "PriceMechanism":
        """Mechanism with phi, psi functions of time only (q, x dummy)."""
        return PriceMechanism(
            phi=lambda t, x, q: phi_of_t(t),
            psi=lambda t, x, q: psi_of_t(t),
            affine_profiles=(phi_of_t, psi_of_t),
        )


def eval_drift(m: PriceMechanism, t: float, x, q: float) -> float:
    """g(t, x, q) = phi*q + psi."""
    return m.drift(t, x, q)


def price_step(q: float, t_next: float, x_next, m: PriceMechanism, N: int) -> float:
    """One tick of the recursive log price: q + g(t_next, x_next, q) / N.

    The drift is evaluated at the NEW type mix and the OLD log price; this
    argument order is the feedback structure under study and is not
    configurable.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    g = m.drift(t_next, x_next, q)
    return q + g / float(N)
