"""Estimation of the competitive storage model from commodity prices.

The price function is solved on a grid, a continuous-resampling particle
filter gives a simulated likelihood that is continuous in the parameters,
and a composite quasi-likelihood, parametric bootstrap, residual
diagnostics and reduced-form benchmarks are provided alongside.
"""
__version__ = "0.1.0"

from .kernels import BACKEND
from .model import (PARAM_NAMES, PRESETS, PriceSeries, ShockDistribution, StructuralParams,
                    demand, inverse_demand, period_rate, preset_params)
from .solver import (GridConfig, PriceFunctionTable, build_grid, build_weight_matrix,
                     eval_price_function, solve_price_function, threshold_price,
                     threshold_stock)
from .moments import gauss_hermite_nodes, invert_state, predictive_moments
from .resample import MixtureSpec, mixture_cdf, mixture_pdf_fft, sample_mixture
from .filter import FilterConfig, FilterOutput, generalized_residuals, pf_loglik
from .simulate import price_stats, simulate_dgp
from .diagnostics import residual_diagnostics
from .cml import CmlConfig, cml_loglik
from .optimize import nelder_mead_maximize
from .estimation import (EstimationReport, ExperimentSpec, estimate, lr_bootstrap_compare,
                         parametric_bootstrap, run_experiment)
from .benchmarks import fit_ar1, fit_garch, fit_ms_ar1

__all__ = [
    "BACKEND", "PARAM_NAMES", "PRESETS", "PriceSeries", "ShockDistribution",
    "StructuralParams", "demand", "inverse_demand", "period_rate", "preset_params",
    "GridConfig", "PriceFunctionTable", "build_grid", "build_weight_matrix",
    "eval_price_function", "solve_price_function", "threshold_price", "threshold_stock",
    "gauss_hermite_nodes", "invert_state", "predictive_moments",
    "MixtureSpec", "mixture_cdf", "mixture_pdf_fft", "sample_mixture",
    "FilterConfig", "FilterOutput", "generalized_residuals", "pf_loglik",
    "price_stats", "simulate_dgp", "residual_diagnostics", "CmlConfig", "cml_loglik",
    "nelder_mead_maximize", "EstimationReport", "ExperimentSpec", "estimate",
    "lr_bootstrap_compare", "parametric_bootstrap", "run_experiment",
    "fit_ar1", "fit_garch", "fit_ms_ar1",
]
