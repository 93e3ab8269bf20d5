"""Kernel interpolation with parametrized Sobolev kernels and shape-parameter diagnostics."""

from shapelab.greedy import GreedyRun, p_greedy, power_function_sq
from shapelab.interpolation import Interpolant, SolveReport, evaluate, fit, native_norm, rmse_error
from shapelab.kernels import (
    Family,
    KernelSpec,
    basic_matern,
    cosh_green,
    cross_matrix,
    eval_kernel,
    kernel_matrix,
    periodic_green,
    radial_matern,
)
from shapelab.points import (
    PointSet,
    fill_distance,
    grid_2d,
    midpoint_grid_1d,
    separation_distance,
    uniformity,
)
from shapelab.rates import BCResidual, BoundaryData, RateTable, bc_residual, pairwise_rates, predict_optimal_eps
from shapelab.spectral import (
    CoefficientDecay,
    DiscreteMercer,
    discrete_mercer,
    eigen_decay_exponent,
    eigenfunction_target,
    mercer_coefficients,
    power_kernel,
    smoothness_estimate,
)

__version__ = "0.1.0"

__all__ = [
    "basic_matern",
    "bc_residual",
    "BCResidual",
    "BoundaryData",
    "CoefficientDecay",
    "cosh_green",
    "cross_matrix",
    "discrete_mercer",
    "DiscreteMercer",
    "eigen_decay_exponent",
    "eigenfunction_target",
    "eval_kernel",
    "evaluate",
    "Family",
    "fill_distance",
    "fit",
    "GreedyRun",
    "grid_2d",
    "Interpolant",
    "kernel_matrix",
    "KernelSpec",
    "mercer_coefficients",
    "midpoint_grid_1d",
    "native_norm",
    "p_greedy",
    "pairwise_rates",
    "periodic_green",
    "PointSet",
    "power_function_sq",
    "power_kernel",
    "predict_optimal_eps",
    "radial_matern",
    "RateTable",
    "rmse_error",
    "separation_distance",
    "smoothness_estimate",
    "SolveReport",
    "uniformity",
]
