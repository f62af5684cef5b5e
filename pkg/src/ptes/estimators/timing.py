"""Feedback delay selection for a prescribed convergence time.

With phases ``dz`` (zeta) and ``dx`` (xi) and

    c  = ceil((4 - (2 dx - dz)) / 2)
    T  = (2D + T*) / (4 - dz + 2c)

the averaged Hessian estimate is exact from ``4T - 2 dx T`` on and the averaged
parameter error from ``tau1 = 4T - dz T + 2cT = T* + 2D`` on.  The choice is
admissible only when ``T > D``, equivalently ``T* > (2 - dz + 2c) D``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..signals import GainSchedule

CEIL_TOL = 1e-12


def _ceil_term(delta_zeta: float, delta_xi: float) -> int:
    # tolerance keeps e.g. 2.0000000000000004 from rounding up
    return math.ceil((4.0 - (2.0 * delta_xi - delta_zeta)) / 2.0 - CEIL_TOL)


@dataclass(frozen=True)
class SettlingTimes:
    t_hessian: float
    t_theta: float
    tau1: float
    tau2: float


@dataclass(frozen=True)
class KhvTiming:
    T: float
    delta_zeta: float
    delta_xi: float
    T_star: float
    D: float
    ceil_term: int

    @property
    def schedule(self) -> GainSchedule:
        return GainSchedule(self.T, self.delta_zeta, self.delta_xi)

    @property
    def settling(self) -> SettlingTimes:
        return settling_times(self)


def admissible_T_star_bound(D: float, delta_zeta: float = 0.0, delta_xi: float = 0.0) -> float:
    """Infimum ``(2 - dz + 2c) D`` of the admissible prescribed times."""
    if D < 0:
        raise ValueError("D must be nonnegative")
    GainSchedule(1.0, delta_zeta, delta_xi)  # range check on the phases
    return (2.0 - delta_zeta + 2.0 * _ceil_term(delta_zeta, delta_xi)) * D


def select_T(D: float, delta_zeta: float, delta_xi: float, T_star: float) -> KhvTiming:
    """Feedback delay ``T`` that places the averaged dead-beat at ``T* + 2D``."""
    if not T_star > 0:
        raise ValueError("T* must be positive")
    bound = admissible_T_star_bound(D, delta_zeta, delta_xi)
    c = _ceil_term(delta_zeta, delta_xi)
    if not T_star > bound:
        raise ValueError(f"T* = {T_star:g} is not admissible: need T* > (2 - delta_zeta + 2c) D = {bound:g}")
    T = (2.0 * D + T_star) / (4.0 - delta_zeta + 2.0 * c)
    return KhvTiming(T, delta_zeta, delta_xi, T_star, D, c)


def settling_times(timing: KhvTiming) -> SettlingTimes:
    T, dz, dx, c = timing.T, timing.delta_zeta, timing.delta_xi, timing.ceil_term
    tau1 = 4.0 * T - dz * T + 2.0 * T * c
    return SettlingTimes(
        t_hessian=4.0 * T - 2.0 * dx * T,
        t_theta=timing.T_star + 2.0 * timing.D,
        tau1=tau1,
        tau2=tau1 - 2.0 * T,
    )
