"""Exception types shared across the package."""


class FeedbackMarketError(Exception):
    """Base class for all package-specific failures."""


class NotStochastic(FeedbackMarketError):
    """I + A/N has a negative diagonal entry: N is too small for the rates."""


class DegenerateDenominator(FeedbackMarketError):
    """The market-clearing denominator fell below its configured lower bound."""


class NoConvergence(FeedbackMarketError):
    """Iterative solver exhausted its iteration budget."""


class TooLarge(FeedbackMarketError):
    """Exact enumeration was requested for an instance beyond the budget."""


class GridMismatch(FeedbackMarketError):
    """Two sampled paths do not share a common grid."""


class SimplexEscape(FeedbackMarketError):
    """ODE step needed a simplex correction larger than the allowed budget."""


class ExtensionUnavailable(FeedbackMarketError):
    """The large-|q| limit of a rate field could not be resolved numerically."""


class ScenarioError(FeedbackMarketError):
    """Scenario file or scenario object failed validation."""
