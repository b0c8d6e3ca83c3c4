"""Finite-population market chain with equilibrium-price feedback, its
deterministic fluid limit, the three-type example market, and a verification
harness for the model's testable identities."""

from ._backend import BACKEND as backend_name
from .core import (CountVector, MarketState, SimplexPoint, Trajectory,
                   normalize_counts, validate_simplex)
from .errors import (DegenerateDenominator, ExtensionUnavailable, FeedbackMarketError,
                     GridMismatch, NoConvergence, NotStochastic, ScenarioError,
                     SimplexEscape, TooLarge)
from .kernel import (RateField, RateMatrixValue, StepStream, StochasticMatrix,
                     build_transition, conditional_mean, conditional_squared_increment,
                     enumerate_one_step, sample_steps, step_counts)
from .limit import DriftField, drift, integrate_limit, volterra_residual
from .price import PriceMechanism, eval_drift, price_step

__version__ = "0.1.0"

__all__ = [
    "backend_name",
    "CountVector", "MarketState", "SimplexPoint", "Trajectory",
    "normalize_counts", "validate_simplex",
    "FeedbackMarketError", "NotStochastic", "DegenerateDenominator", "NoConvergence",
    "TooLarge", "GridMismatch", "SimplexEscape", "ExtensionUnavailable", "ScenarioError",
    "RateField", "RateMatrixValue", "StepStream", "StochasticMatrix",
    "build_transition", "conditional_mean", "conditional_squared_increment",
    "enumerate_one_step", "sample_steps", "step_counts",
    "DriftField", "drift", "integrate_limit", "volterra_residual",
    "PriceMechanism", "eval_drift", "price_step",
    "__version__",
]
