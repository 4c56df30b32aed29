"""Bivariate orthogonal polynomials, block Jacobi matrices and the 2D Toda flow."""
from .errors import BivTodaError
from .estimator import BivariateOPS
from .exact import ExactOPS, exact_ops
from .jacobi import BlockTridiagonal, assemble, corner_moment, commutation_residuals, spectrum
from .moments import MomentTable, compute_moments, exact_moments, moment_ode_residual
from .ops import (OpsSet, OrthonormalSet, RecurrenceSet, build_ops, orthonormalize,
                  recurrence_from_ops)
from .stieltjes import StieltjesSeries, eval_series, marginal_series, stieltjes_ode_residual
from .toda import (TodaState, alt_toda_rhs, exact_state, integrate_toda, isospectral_drift,
                   toda_rhs)
from .weights import SQUARE, TRIANGLE, WeightSpec, build_quadrature, evaluate_weight

__all__ = [
    "BivTodaError", "BivariateOPS", "ExactOPS", "exact_ops", "BlockTridiagonal", "assemble",
    "corner_moment", "commutation_residuals", "spectrum", "MomentTable", "compute_moments",
    "exact_moments", "moment_ode_residual", "OpsSet", "OrthonormalSet", "RecurrenceSet",
    "build_ops", "orthonormalize", "recurrence_from_ops", "StieltjesSeries", "eval_series",
    "marginal_series", "stieltjes_ode_residual", "TodaState", "alt_toda_rhs", "exact_state",
    "integrate_toda", "isospectral_drift", "toda_rhs", "SQUARE", "TRIANGLE", "WeightSpec",
    "build_quadrature", "evaluate_weight",
]
