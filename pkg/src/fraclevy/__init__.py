"""Fractional Levy processes: simulation, white-noise chaos calculus and Wick-type equations."""

__version__ = "0.1.0"

from ._kernels import BACKEND
from .chaos import (
    BasisSpec,
    ChaosElement,
    TestFunction,
    distribution_norm,
    flp_element,
    noise_element,
    probe_set,
    s_transform,
    wick_exp,
    wick_product,
)
from .flp_simulate import empirical_moments, simulate_flp_paths, transform_alpha_to_beta
from .frac_ops import indicator_kernel_weights, rl_fractional_integral
from .grid import GridFunction, TimeGrid
from .levy_models import LevyModel, discretize_measure, sample_increments, second_moment
from .sde import SdeProblem, WickAffineCoefficient, holder_noise_check, picard_solve, validate_coefficients
from .stochastic_integral import (
    fractional_transform_integrand,
    skorohod_frac,
    skorohod_pjm,
    wiener_integral_pathwise,
)
from .volterra import VolterraProblem, kernel_density, kernel_preset, resolvent_kernel, solve_volterra

__all__ = [
    "BACKEND",
    "BasisSpec",
    "ChaosElement",
    "GridFunction",
    "LevyModel",
    "SdeProblem",
    "TestFunction",
    "TimeGrid",
    "VolterraProblem",
    "WickAffineCoefficient",
    "discretize_measure",
    "distribution_norm",
    "empirical_moments",
    "flp_element",
    "fractional_transform_integrand",
    "holder_noise_check",
    "indicator_kernel_weights",
    "kernel_density",
    "kernel_preset",
    "noise_element",
    "picard_solve",
    "probe_set",
    "resolvent_kernel",
    "rl_fractional_integral",
    "s_transform",
    "sample_increments",
    "second_moment",
    "simulate_flp_paths",
    "skorohod_frac",
    "skorohod_pjm",
    "solve_volterra",
    "transform_alpha_to_beta",
    "validate_coefficients",
    "wick_exp",
    "wick_product",
    "wiener_integral_pathwise",
]
