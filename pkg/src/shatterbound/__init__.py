"""Shattering-coefficient estimation for linear neurons and learning bounds for CNNs."""

__version__ = "0.1.0"

from .arch import (
    ArchitectureSpec,
    LayerSpec,
    LogShatterFunction,
    compare_architectures,
    compose_shattering,
    equivalent_single_layer,
    log_evaluate,
    parse_architecture,
    receptive_dims,
)
from .bounds import (
    GammaQuery,
    chernoff_log_probability,
    gamma_at,
    generalization_divergence,
    min_n_chernoff,
    min_n_gamma,
    min_n_gamma_poly,
    risk_bound,
)
from .polyfit import QuadraticFit, evaluate, fit_quadratic
from .shatter_mc import (
    EstimatorConfig,
    ShatterCurve,
    brute_force_dichotomy_count,
    cover_bound,
    estimate_shattering,
)
