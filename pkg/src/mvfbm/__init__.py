"""Mean-field stochastic evolution equations driven by Brownian motion and
fractional Brownian motion: samplers, metrics, solvers and diagnostics."""

from .fbm import fbm_integral_second_moment, generate_fgn, generate_fgn_batch, wiener_integral_fbm
from .metrics import EmpiricalMeasure, MeasurePath, dbl_lower, wasserstein2
from .solver import McKeanVlasovProblem, picard_measure_iteration, simulate

__version__ = "0.1.0"

__all__ = [
    "EmpiricalMeasure",
    "MeasurePath",
    "McKeanVlasovProblem",
    "dbl_lower",
    "fbm_integral_second_moment",
    "generate_fgn",
    "generate_fgn_batch",
    "picard_measure_iteration",
    "simulate",
    "wasserstein2",
    "wiener_integral_fbm",
]
