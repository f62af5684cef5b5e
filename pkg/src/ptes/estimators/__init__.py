"""Seeking algorithms and their timing."""

from .baseline import (BaselineGains, BaselineState, baseline_distributed, baseline_outputs,
                       baseline_problem, baseline_rhs)
from .khv import (AltState, KhvMultiState, KhvScalarState, delay_free_alt_problem, delay_free_alt_rhs,
                  khv_multi_outputs, khv_multi_problem, khv_multi_rhs, khv_scalar_outputs,
                  khv_scalar_problem, khv_scalar_rhs, multi_layout)
from .lemma1 import PiecewiseConstant, lemma1_problem, lemma1_problem_callable, lemma1_rhs
from .timing import KhvTiming, SettlingTimes, admissible_T_star_bound, select_T, settling_times

__all__ = [
    "AltState", "BaselineGains", "BaselineState", "KhvMultiState", "KhvScalarState", "KhvTiming",
    "PiecewiseConstant", "SettlingTimes", "admissible_T_star_bound", "baseline_distributed", "baseline_outputs", "baseline_problem",
    "baseline_rhs", "delay_free_alt_problem", "delay_free_alt_rhs", "khv_multi_outputs",
    "khv_multi_problem", "khv_multi_rhs", "khv_scalar_outputs", "khv_scalar_problem", "khv_scalar_rhs",
    "lemma1_problem", "lemma1_problem_callable", "lemma1_rhs", "multi_layout", "select_T",
    "settling_times",
]
