"""Newton-based prescribed-time extremum seeking with periodic delayed feedback.

Scalar map with input delay D (state ``theta_hat, z, Gamma, H_hat``)::

    theta_hat' = z
    z'         = -2 K_T z(t-T) + L_T [theta_hat(t-D) - theta_hat(t-T) - Gamma M y]
    Gamma'     =  K_2T Gamma^2 [H_hat(t-2T) - N y]
    H_hat'     = -K_2T [H_hat(t-2T) - N y]

with ``y = y* + H*/2 (theta_hat(t-D) + a sin(w t) - theta*)^2``.  The vector
version (delay-free map) uses ``theta_hat(t)`` in place of ``theta_hat(t-D)``
and the sandwich ``Gamma [.] Gamma`` in the Riccati equation.

The delay-free alternative replaces the second-order parameter loop by

    theta_hat' = -K_T Gamma M y(t-T)
    Gamma'     =  K_4T Gamma^2 [H_hat(t-4T) - N y(t-T)]
    H_hat'     = -K_4T [H_hat(t-4T) - N y(t-T)]

with the probe advanced by T.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from ..dde import RfdeProblem, Trajectory
from ..plant import QuadraticMapMulti, QuadraticMapScalar
from ..signals import (DitherSpecMulti, DitherSpecScalar, GainSchedule, dither_multi_kernel,
                       k2t_kernel, k4t_kernel, kt_kernel, lt_kernel)


# -- scalar ----------------------------------------------------------------

@dataclass(frozen=True)
class KhvScalarState:
    theta_hat: float
    z: float
    Gamma: float
    H_hat: float | None = None

    def __post_init__(self):
        if self.Gamma == 0:
            raise ValueError("Gamma must be nonzero")
        if self.H_hat is None:
            object.__setattr__(self, "H_hat", 1.0 / self.Gamma)

    def as_array(self) -> np.ndarray:
        return np.array([self.theta_hat, self.z, self.Gamma, self.H_hat])


@njit(cache=True)
def khv_scalar_kernel(t, x, lag, p):
    y_s, th_s, H_s, D, a, w, T, dz, dx = p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7], p[8]
    # p[9] shifts the dither clock only; the averaging checks sweep it over a period
    td = t + p[9]
    th_D = lag[0, 0]
    s = math.sin(w * td)
    probe = a * math.sin(w * ((td - D) + D))
    M = 2.0 / a * s
    N = 16.0 / (a * a) * (s * s - 0.5)
    e = th_D + probe - th_s
    y = y_s + 0.5 * H_s * e * e
    KT = kt_kernel(t, T, dz)
    LT = lt_kernel(t, T, dz)
    K2 = k2t_kernel(t, T, dx)
    G = x[2]
    innov = lag[2, 3] - N * y
    out = np.empty(4)
    out[0] = x[1]
    out[1] = -2.0 * KT * lag[1, 1] + LT * (th_D - lag[1, 0] - G * M * y)
    out[2] = K2 * G * G * innov
    out[3] = -K2 * innov
    return out


def khv_scalar_params(plant: QuadraticMapScalar, dither: DitherSpecScalar, sched: GainSchedule,
                      dither_offset: float = 0.0) -> np.ndarray:
    return np.array([plant.y_star, plant.theta_star, plant.H_star, plant.D, dither.a, dither.omega,
                     sched.T, sched.delta_zeta, sched.delta_xi, dither_offset])


def khv_scalar_rhs(t, state, lagged, plant, dither, sched):
    """Derivative of ``(theta_hat, z, Gamma, H_hat)``; ``lagged`` rows are t-D, t-T, t-2T."""
    return khv_scalar_kernel(t, np.asarray(state, float), np.asarray(lagged, float),
                             khv_scalar_params(plant, dither, sched))


def _check_scalar(plant, dither, sched):
    if not sched.T > plant.D:
        raise ValueError(f"need T > D, got T = {sched.T}, D = {plant.D}")
    if dither.D != plant.D:
        raise ValueError("dither advance must equal the map delay")


def khv_scalar_problem(plant: QuadraticMapScalar, dither: DitherSpecScalar, sched: GainSchedule,
                       init: KhvScalarState, history=None) -> RfdeProblem:
    """RFDE for the scalar scheme; constant history at ``init`` unless given."""
    _check_scalar(plant, dither, sched)
    return RfdeProblem(khv_scalar_kernel, 4, (plant.D, sched.T, 2 * sched.T),
                       init.as_array() if history is None else history,
                       khv_scalar_params(plant, dither, sched))


def khv_scalar_outputs(traj: Trajectory, plant: QuadraticMapScalar, dither: DitherSpecScalar,
                       sched: GainSchedule) -> dict:
    """Measured output, applied input and gains on the solution grid."""
    t, _ = traj.solution()
    lag = int(round(plant.D / traj.step))
    th_D = traj.states[traj.n_history - lag: traj.states.shape[0] - lag, 0]
    theta_D = th_D + dither.a * np.sin(dither.omega * ((t - plant.D) + plant.D))
    theta = traj.states[traj.n_history:, 0] + dither.a * np.sin(dither.omega * (t + plant.D))
    return {
        "y": plant(theta_D),
        "theta": theta,
        "K_T": kt_kernel(t, sched.T, sched.delta_zeta),
        "L_T": lt_kernel(t, sched.T, sched.delta_zeta),
        "K_2T": k2t_kernel(t, sched.T, sched.delta_xi),
    }


# -- multivariable ---------------------------------------------------------

@dataclass(frozen=True)
class KhvMultiState:
    theta_hat: np.ndarray
    z: np.ndarray
    Gamma: np.ndarray
    H_hat: np.ndarray | None = None

    def __post_init__(self):
        th = np.asarray(self.theta_hat, float).reshape(-1)
        n = th.size
        G = np.asarray(self.Gamma, float).reshape(n, n)
        H = np.linalg.inv(G) if self.H_hat is None else np.asarray(self.H_hat, float).reshape(n, n)
        object.__setattr__(self, "theta_hat", th)
        object.__setattr__(self, "z", np.asarray(self.z, float).reshape(n))
        object.__setattr__(self, "Gamma", G)
        object.__setattr__(self, "H_hat", H)

    @property
    def n(self) -> int:
        return self.theta_hat.size

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.theta_hat, self.z, self.Gamma.ravel(), self.H_hat.ravel()])


def multi_layout(n: int) -> dict:
    """Slices of the flat state vector."""
    return {"theta_hat": slice(0, n), "z": slice(n, 2 * n),
            "Gamma": slice(2 * n, 2 * n + n * n), "H_hat": slice(2 * n + n * n, 2 * n + 2 * n * n)}


@njit(cache=True)
def khv_multi_kernel(t, x, lag, p):
    n = int(p[1])
    y_s, T, dz, dx = p[0], p[2], p[3], p[4]
    o = 6
    th_s = p[o:o + n]
    H_s = p[o + n:o + n + n * n].reshape((n, n))
    a = p[o + n + n * n:o + 2 * n + n * n]
    w = p[o + 2 * n + n * n:o + 3 * n + n * n]
    S, M, N = dither_multi_kernel(t + p[5], a, w)
    th = x[0:n]
    e = th + S - th_s
    y = y_s + 0.5 * (e @ (H_s @ e))
    KT = kt_kernel(t, T, dz)
    LT = lt_kernel(t, T, dz)
    K2 = k2t_kernel(t, T, dx)
    G = x[2 * n:2 * n + n * n].reshape((n, n))
    H_lag = lag[1, 2 * n + n * n:].reshape((n, n))
    innov = H_lag - N * y
    out = np.empty(x.size)
    out[0:n] = x[n:2 * n]
    out[n:2 * n] = -2.0 * KT * lag[0, n:2 * n] + LT * (th - lag[0, 0:n] - G @ M * y)
    out[2 * n:2 * n + n * n] = (K2 * (G @ innov @ G)).ravel()
    out[2 * n + n * n:] = (-K2 * innov).ravel()
    return out


def khv_multi_params(plant: QuadraticMapMulti, dither: DitherSpecMulti, sched: GainSchedule,
                     dither_offset: float = 0.0) -> np.ndarray:
    if dither.n != plant.n:
        raise ValueError("dither and map dimensions differ")
    return np.concatenate([[plant.y_star, plant.n, sched.T, sched.delta_zeta, sched.delta_xi, dither_offset],
                           plant.theta_star, plant.H_star.ravel(), dither.amplitudes, dither.omegas])


def khv_multi_rhs(t, state, lagged, plant, dither, sched):
    """Flat-state derivative; ``lagged`` rows are t-T and t-2T."""
    return khv_multi_kernel(t, np.asarray(state, float), np.asarray(lagged, float),
                            khv_multi_params(plant, dither, sched))


def khv_multi_problem(plant: QuadraticMapMulti, dither: DitherSpecMulti, sched: GainSchedule,
                      init: KhvMultiState, history=None) -> RfdeProblem:
    if init.n != plant.n:
        raise ValueError("initial state and map dimensions differ")
    return RfdeProblem(khv_multi_kernel, plant.n * (2 + 2 * plant.n), (sched.T, 2 * sched.T),
                       init.as_array() if history is None else history,
                       khv_multi_params(plant, dither, sched))


def khv_multi_outputs(traj: Trajectory, plant: QuadraticMapMulti, dither: DitherSpecMulti,
                      sched: GainSchedule) -> dict:
    t, X = traj.solution()
    n = plant.n
    theta = X[:, :n] + np.asarray(dither.amplitudes) * np.sin(np.outer(t, dither.omegas))
    e = theta - plant.theta_star
    out = {"y": plant.y_star + 0.5 * np.einsum("ki,ij,kj->k", e, plant.H_star, e)}
    for i in range(n):
        out[f"theta_{i + 1}"] = theta[:, i]
    out["K_T"] = kt_kernel(t, sched.T, sched.delta_zeta)
    out["L_T"] = lt_kernel(t, sched.T, sched.delta_zeta)
    out["K_2T"] = k2t_kernel(t, sched.T, sched.delta_xi)
    return out


# -- delay-free alternative ------------------------------------------------

@dataclass(frozen=True)
class AltState:
    theta_hat: float
    Gamma: float
    H_hat: float | None = None

    def __post_init__(self):
        if self.H_hat is None:
            object.__setattr__(self, "H_hat", 1.0 / self.Gamma)

    def as_array(self) -> np.ndarray:
        return np.array([self.theta_hat, self.Gamma, self.H_hat])


@njit(cache=True)
def delay_free_alt_kernel(t, x, lag, p):
    y_s, th_s, H_s, D, a, w, T, dz, dx, use_map_delay = (p[0], p[1], p[2], p[3], p[4], p[5],
                                                         p[6], p[7], p[8], p[9])
    s = math.sin(w * t)
    M = 2.0 / a * s
    N = 16.0 / (a * a) * (s * s - 0.5)
    if use_map_delay > 0.5:
        # map delay D = T: the present output already sees theta_hat(t - D)
        e = lag[0, 0] + a * math.sin(w * ((t - D) + D)) - th_s
    else:
        # delay-free map sampled T in the past, probe advanced by T
        e = lag[0, 0] + a * math.sin(w * ((t - T) + T)) - th_s
    y = y_s + 0.5 * H_s * e * e
    KT = kt_kernel(t, T, dz)
    K4 = k4t_kernel(t, T, dx)
    G = x[1]
    innov = lag[1, 2] - N * y
    out = np.empty(3)
    out[0] = -KT * G * M * y
    out[1] = K4 * G * G * innov
    out[2] = -K4 * innov
    return out


def delay_free_alt_params(plant, dither, sched, use_map_delay=False) -> np.ndarray:
    return np.array([plant.y_star, plant.theta_star, plant.H_star, plant.D, dither.a, dither.omega,
                     sched.T, sched.delta_zeta, sched.delta_xi, 1.0 if use_map_delay else 0.0])


def delay_free_alt_rhs(t, state, lagged, plant, dither, sched, use_map_delay=False):
    """Derivative of ``(theta_hat, Gamma, H_hat)``; ``lagged`` rows are t-T and t-4T."""
    return delay_free_alt_kernel(t, np.asarray(state, float), np.asarray(lagged, float),
                                 delay_free_alt_params(plant, dither, sched, use_map_delay))


def delay_free_alt_problem(plant: QuadraticMapScalar, dither: DitherSpecScalar, sched: GainSchedule,
                           init: AltState, use_map_delay: bool = False, history=None) -> RfdeProblem:
    """Delay-free map (``D = 0``) or, with ``use_map_delay``, a map whose delay is ``T``."""
    if use_map_delay:
        if abs(plant.D - sched.T) > 1e-12 * sched.T:
            raise ValueError("using the map delay requires T = D")
    elif plant.D != 0:
        raise ValueError("the delay-free alternative needs D = 0 (or use_map_delay with T = D)")
    if abs(dither.D - sched.T) > 1e-12 * sched.T:
        raise ValueError("the probe must be advanced by T")
    return RfdeProblem(delay_free_alt_kernel, 3, (sched.T, 4 * sched.T),
                       init.as_array() if history is None else history,
                       delay_free_alt_params(plant, dither, sched, use_map_delay))
