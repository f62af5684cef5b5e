"""Exponentially convergent Newton extremum seeking with delay compensation.

Predictor-feedback form with the distributed delay term rewritten pointwise::

    theta_hat' = z
    z'         = -c z - c K Gamma M y - c K theta_hat(t) + c K theta_hat(t-D)
    Gamma'     = w_r Gamma - w_r N y Gamma^2

:func:`baseline_distributed` integrates the original form, which carries
``-c K int_{t-D}^{t} z(s) ds`` instead of the two pointwise terms.  It is an
independent cross-check and runs in plain Python.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from ..dde import RfdeProblem, Trajectory
from ..plant import QuadraticMapScalar
from ..signals import DitherSpecScalar


@dataclass(frozen=True)
class BaselineGains:
    c: float
    K: float
    w_r: float

    def __post_init__(self):
        if not self.c > self.K > 0:
            raise ValueError(f"need c > K > 0, got c = {self.c}, K = {self.K}")
        if not self.w_r > 0:
            raise ValueError("w_r must be positive")


@dataclass(frozen=True)
class BaselineState:
    theta_hat: float
    z: float
    Gamma: float

    def as_array(self) -> np.ndarray:
        return np.array([self.theta_hat, self.z, self.Gamma])


@njit(cache=True)
def baseline_kernel(t, x, lag, p):
    y_s, th_s, H_s, D, a, w, c, K, wr = p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7], p[8]
    s = math.sin(w * t)
    M = 2.0 / a * s
    N = 16.0 / (a * a) * (s * s - 0.5)
    th_D = lag[0, 0]
    e = th_D + a * math.sin(w * ((t - D) + D)) - th_s
    y = y_s + 0.5 * H_s * e * e
    G = x[2]
    out = np.empty(3)
    out[0] = x[1]
    out[1] = -c * x[1] - c * K * G * M * y - c * K * x[0] + c * K * th_D
    out[2] = wr * G - wr * N * y * G * G
    return out


def baseline_params(plant, dither, gains) -> np.ndarray:
    return np.array([plant.y_star, plant.theta_star, plant.H_star, plant.D, dither.a, dither.omega,
                     gains.c, gains.K, gains.w_r])


def baseline_rhs(t, state, lagged, plant, dither, gains):
    """Derivative of ``(theta_hat, z, Gamma)``; ``lagged`` row 0 is t-D."""
    return baseline_kernel(t, np.asarray(state, float), np.asarray(lagged, float),
                           baseline_params(plant, dither, gains))


def baseline_problem(plant: QuadraticMapScalar, dither: DitherSpecScalar, gains: BaselineGains,
                     init: BaselineState, history=None) -> RfdeProblem:
    if dither.D != plant.D:
        raise ValueError("dither advance must equal the map delay")
    return RfdeProblem(baseline_kernel, 3, (plant.D,),
                       init.as_array() if history is None else history,
                       baseline_params(plant, dither, gains))


def baseline_outputs(traj: Trajectory, plant, dither) -> dict:
    t, X = traj.solution()
    lag = int(round(plant.D / traj.step))
    th_D = traj.states[traj.n_history - lag: traj.states.shape[0] - lag, 0]
    return {"y": plant(th_D + dither.a * np.sin(dither.omega * t)),
            "theta": X[:, 0] + dither.a * np.sin(dither.omega * (t + plant.D))}


def baseline_distributed(plant: QuadraticMapScalar, dither: DitherSpecScalar, gains: BaselineGains,
                         history, t_end: float, step: float):
    """RK4 on the distributed-delay form with trapezoid quadrature of ``z``.

    ``history(s)`` returns ``(theta_hat, z, Gamma)`` on ``[-D, 0]``.  Returns
    node times and states on ``[0, t_end]``.
    """
    D = plant.D
    if not D > 0:
        raise ValueError("the distributed form needs D > 0")
    m = int(round(D / step))
    n = int(round(t_end / step))
    a, w = dither.a, dither.omega
    c, K, wr = gains.c, gains.K, gains.w_r
    X = np.empty((m + n + 1, 3))
    for k in range(m + 1):
        X[k] = history((k - m) * step)
    # running trapezoid integral of z from -D up to each node
    C = np.zeros(m + n + 1)
    for k in range(1, m + 1):
        C[k] = C[k - 1] + 0.5 * step * (X[k - 1, 1] + X[k, 1])

    def integral(i, frac, z_stage):
        # int_{t-D}^{t} z with t = node i + frac*step
        upper = C[i] + 0.5 * frac * step * (X[i, 1] + z_stage)
        j = i - m
        z_lo = X[j, 1] + frac * (X[j + 1, 1] - X[j, 1])
        lower = C[j] + 0.5 * frac * step * (X[j, 1] + z_lo)
        return upper - lower

    def f(t, x, lag_theta, I):
        s = math.sin(w * t)
        M = 2.0 / a * s
        N = 16.0 / (a * a) * (s * s - 0.5)
        e = lag_theta + a * math.sin(w * t) - plant.theta_star
        y = plant.y_star + 0.5 * plant.H_star * e * e
        return np.array([x[1],
                         -c * x[1] - c * K * x[2] * M * y - c * K * I,
                         wr * x[2] - wr * N * y * x[2] ** 2])

    def theta_lag(i, frac):
        j = i - m
        return X[j, 0] + frac * (X[j + 1, 0] - X[j, 0])

    for k in range(n):
        i = m + k
        t = k * step
        x = X[i]
        k1 = f(t, x, theta_lag(i, 0.0), integral(i, 0.0, x[1]))
        xs = x + 0.5 * step * k1
        k2 = f(t + 0.5 * step, xs, theta_lag(i, 0.5), integral(i, 0.5, xs[1]))
        xs = x + 0.5 * step * k2
        k3 = f(t + 0.5 * step, xs, theta_lag(i, 0.5), integral(i, 0.5, xs[1]))
        xs = x + step * k3
        k4 = f(t + step, xs, theta_lag(i, 1.0), integral(i, 1.0, xs[1]))
        X[i + 1] = x + step / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        C[i + 1] = C[i] + 0.5 * step * (X[i, 1] + X[i + 1, 1])
    return np.arange(n + 1) * step, X[m:]
