"""Estimation of rough microstructure noise and integrated volatility from
high-frequency prices."""
from .estimate import (EstimationResult, WeightConfig, combined_estimate, debias_ladder,
                       no_lag0_estimate)
from .estimators import LaggedVariationTransformer, RoughNoiseEstimator
from .exceptions import ConvergenceError, DegenerateError, DomainError, InputError, RoughVolError
from .kernel import RatioFunction, gamma, gamma_vector
from .simulate import PricePath, SimConfig, simulate_mixed
from .stats import VariationStats, variation_stats

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError", "DegenerateError", "DomainError", "EstimationResult", "InputError",
    "LaggedVariationTransformer", "PricePath", "RatioFunction", "RoughNoiseEstimator",
    "RoughVolError", "SimConfig", "VariationStats", "WeightConfig", "combined_estimate",
    "debias_ladder", "gamma", "gamma_vector", "no_lag0_estimate", "simulate_mixed",
    "variation_stats",
]
