"""Fractional stochastic heat equation with spatially correlated noise.

Stable-law heat kernels, a spectral exponential-Euler solver on the torus,
controlled skeleton paths, the Freidlin-Wentzell rate function and Monte
Carlo probes of the small-noise behaviour.
"""

__version__ = "0.1.0"

from .coefficients import Coefficient, constant, linear, tanh
from .config import SimConfig, config_from_dict, config_hash, config_to_dict, ensure_runnable
from .errors import NumericalError, OptimizationError, ValidationError
from .harness import (
    HoelderParams,
    controlled_convergence_test,
    estimate_tail,
    hoelder_norm,
    increment_regularity_test,
    tail_plot_svg,
)
from .kernel import FrequencyGrid, Quadrature, StableIndex, green_1d, green_nd, semigroup_apply, symbol
from .noise import SpectralMeasure, check_integrability, mode_weights, sample_increment
from .ratefn import control_cost, point_rate, rate_linear_oracle, rate_minimize
from .skeleton import ControlPath, pairing_drift, solve_skeleton, weak_continuity_probe
from .solver import Field, Trajectory, moment_estimate, picard_solve, simulate_path, step_mild

__all__ = [
    "Coefficient", "constant", "linear", "tanh",
    "SimConfig", "config_from_dict", "config_hash", "config_to_dict", "ensure_runnable",
    "NumericalError", "OptimizationError", "ValidationError",
    "HoelderParams", "controlled_convergence_test", "estimate_tail", "hoelder_norm",
    "increment_regularity_test", "tail_plot_svg",
    "FrequencyGrid", "Quadrature", "StableIndex", "green_1d", "green_nd", "semigroup_apply", "symbol",
    "SpectralMeasure", "check_integrability", "mode_weights", "sample_increment",
    "control_cost", "point_rate", "rate_linear_oracle", "rate_minimize",
    "ControlPath", "pairing_drift", "solve_skeleton", "weak_continuity_probe",
    "Field", "Trajectory", "moment_estimate", "picard_solve", "simulate_path", "step_mild",
]
