"""Solver error control for Bayesian inverse problems.

Forward-map tolerances are derived from a target expected absolute Bayes
factor, then enforced by error-estimating ODE and PDE solvers inside an
adaptive Metropolis sampler.
"""

from .bound import admissible_K0, correlation_factor, eabf_upper_bound, sigma_star
from .model import NoiseModel, PosteriorProblem, PrecisionSpec, PriorSpec, build_precision, log_likelihood, log_posterior
from .sampler import SamplerConfig, Trace, effective_sample_size, map_estimate, run_chain

__version__ = "0.1.0"

__all__ = [
    "NoiseModel",
    "PosteriorProblem",
    "PrecisionSpec",
    "PriorSpec",
    "SamplerConfig",
    "Trace",
    "admissible_K0",
    "build_precision",
    "correlation_factor",
    "eabf_upper_bound",
    "effective_sample_size",
    "log_likelihood",
    "log_posterior",
    "map_estimate",
    "run_chain",
    "sigma_star",
]
