"""Averaged dynamics, bounds and metrics."""

from .averaged import (AveragedScalarState, averaged_alt_problem, averaged_alt_rhs, averaged_multi_initial,
                       averaged_multi_problem, averaged_multi_rhs, averaged_rhs, averaged_scalar_problem,
                       make_averaged_alt_kernel, make_averaged_multi_kernel, make_averaged_scalar_kernel,
                       target_residuals, target_transform)
from .averaging import AveragingResiduals, averaging_residuals, period_average_multi, period_average_scalar
from .bounds import (IssParams, claim1_bound_check, deadbeat_time, iss_bound, iss_control_bound,
                     running_sup)
from .metrics import classify_settling, closeness_metric, riccati_relation_residual, settling_time

__all__ = [
    "AveragedScalarState", "AveragingResiduals", "IssParams", "averaged_alt_problem", "averaged_alt_rhs",
    "averaged_multi_initial", "averaged_multi_problem", "averaged_multi_rhs", "averaged_rhs",
    "averaged_scalar_problem", "averaging_residuals", "classify_settling", "claim1_bound_check", "closeness_metric",
    "deadbeat_time", "iss_bound", "iss_control_bound", "make_averaged_alt_kernel",
    "make_averaged_multi_kernel", "make_averaged_scalar_kernel", "period_average_multi",
    "period_average_scalar", "riccati_relation_residual", "running_sup", "settling_time",
    "target_residuals", "target_transform",
]
