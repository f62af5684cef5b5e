"""Single integrator under periodic delayed feedback.

    x'(t) = -K_T(t) x(t - T) + v(t)

With ``v = 0`` the state reaches zero at the end of the first complete
active window of ``K_T`` and stays there.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from ..dde import RfdeProblem
from ..signals import GainSchedule, kt_kernel


@dataclass(frozen=True)
class PiecewiseConstant:
    """``v(t) = values[k]`` on ``[breaks[k], breaks[k+1])``; the last value extends."""

    breaks: tuple
    values: tuple

    def __post_init__(self):
        b = tuple(float(x) for x in self.breaks)
        v = tuple(float(x) for x in self.values)
        if len(b) != len(v) or not b:
            raise ValueError("breaks and values must be nonempty and of equal length")
        if any(b2 <= b1 for b1, b2 in zip(b, b[1:])):
            raise ValueError("breaks must be increasing")
        object.__setattr__(self, "breaks", b)
        object.__setattr__(self, "values", v)

    @classmethod
    def zero(cls) -> "PiecewiseConstant":
        return cls((0.0,), (0.0,))

    def __call__(self, t):
        b = np.asarray(self.breaks)
        k = np.searchsorted(b, t, side="right") - 1
        return np.where(k < 0, 0.0, np.asarray(self.values)[np.clip(k, 0, None)])

    @property
    def sup(self) -> float:
        return max(abs(v) for v in self.values)


@njit(cache=True)
def lemma1_kernel(t, x, lag, p):
    T, dz, m = p[0], p[1], int(p[2])
    v = 0.0
    for k in range(m):
        if t >= p[3 + k]:
            v = p[3 + m + k]
    out = np.empty(1)
    out[0] = -kt_kernel(t, T, dz) * lag[0, 0] + v
    return out


def lemma1_params(sched: GainSchedule, v: PiecewiseConstant) -> np.ndarray:
    return np.concatenate([[sched.T, sched.delta_zeta, len(v.breaks)], v.breaks, v.values])


def lemma1_rhs(t, x_now, x_lagged, sched: GainSchedule, v):
    """``-K_T(t) x(t-T) + v(t)`` for any callable ``v``."""
    return -kt_kernel(t, sched.T, sched.delta_zeta) * x_lagged + v(t)


def lemma1_problem(sched: GainSchedule, history, v: PiecewiseConstant | None = None) -> RfdeProblem:
    """Jitted problem for piecewise-constant ``v``; ``history`` is a constant or callable."""
    v = PiecewiseConstant.zero() if v is None else v
    if np.ndim(history) == 0 and not callable(history):
        history = np.array([float(history)])
    return RfdeProblem(lemma1_kernel, 1, (sched.T,), history, lemma1_params(sched, v))


def lemma1_problem_callable(sched: GainSchedule, history, v) -> RfdeProblem:
    """Interpreted problem for an arbitrary callable ``v``."""
    def rhs(t, x, lag, p):
        return np.array([lemma1_rhs(t, x[0], lag[0, 0], sched, v)], dtype=float).reshape(1)
    if np.ndim(history) == 0 and not callable(history):
        history = np.array([float(history)])
    return RfdeProblem(rhs, 1, (sched.T,), history)
