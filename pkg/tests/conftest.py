import numpy as np
import pytest

from feedback_market import RateField
from feedback_market.harness import InitialLaw, Scenario
from feedback_market.lux3 import Lux3Params

SYMMETRIC_A = [[-0.5, 0.25, 0.25], [0.25, -0.5, 0.25], [0.25, 0.25, -0.5]]


@pytest.fixture
def symmetric_rate():
    return RateField.constant(SYMMETRIC_A)


def lux3_constant(alpha=(1.0, 1.0, 1.0), beta=(-1.0, -0.5, -0.5),
                  delta=(0.5, 0.5, 0.5), log_f=0.0, b_lower=1e-9):
    return Lux3Params.constant(alpha, beta, delta, log_f, b_lower=b_lower)


def lux3_scenario(n_values=(100,), T=2.0, replicas=10, seed=42, h=1e-3,
                  x0=(0.6, 0.2, 0.2), q0=1.0, params=None, rate=None,
                  initial="deterministic"):
    return Scenario(
        r=3, n_values=tuple(n_values), T=T, h=h, seed=seed, replicas=replicas,
        rate=rate if rate is not None else RateField.constant(SYMMETRIC_A),
        mech_kind="lux3",
        initial=InitialLaw(initial, np.array(x0), q0),
        lux_params=params if params is not None else lux3_constant(),
    )


def affine_scenario(r=3, n_values=(100,), T=1.0, replicas=4, seed=7, h=1e-3,
                    x0=None, q0=1.0, phi=lambda t: -1.0, psi=lambda t: 0.0,
                    rate=None):
    if x0 is None:
        x0 = np.full(r, 1.0 / r)
    return Scenario(
        r=r, n_values=tuple(n_values), T=T, h=h, seed=seed, replicas=replicas,
        rate=rate if rate is not None else RateField.zero(r),
        mech_kind="affine",
        initial=InitialLaw("deterministic", np.asarray(x0, dtype=float), q0),
        affine_phi=phi, affine_psi=psi,
    )
