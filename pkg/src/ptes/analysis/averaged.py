"""Averaged error dynamics and the target-system transform.

Error coordinates: ``theta~ = theta_hat - theta*``, ``Gamma~ = Gamma - H*^-1``,
``H~ = H_hat - H*``.  Averaging the scalar scheme over one dither period gives

    theta~' = z
    z'      = -2 K_T z(t-T) - L_T [theta~(t-T) + Gamma~ H* theta~(t-D)]
    Gamma~' =  K_2T H~(t-2T) (Gamma~ + 1/H*)^2
    H~'     = -K_2T H~(t-2T)

The delay-free vector version uses ``theta~(t)`` and the sandwich
``(Gamma~ + H*^-1) H~(t-2T) (Gamma~ + H*^-1)``.  For the delay-free
alternative the parameter loop averages to
``theta~' = -K_T (Gamma~ + 1/H*) H* theta~(t-T)`` with K_4T and a 4T lag in
the Hessian loop.

Each kernel is built by a factory that takes the gain functions, so a
deliberately perturbed gain can be injected when testing the checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from ..dde import RfdeProblem, Trajectory
from ..signals import GainSchedule, k2t_kernel, k4t_kernel, kt_kernel, lt_kernel


# -- kernels ---------------------------------------------------------------

def make_averaged_scalar_kernel(kt=kt_kernel, lt=lt_kernel, k2t=k2t_kernel):
    @njit
    def kernel(t, x, lag, p):
        H_s, T, dz, dx = p[0], p[2], p[3], p[4]
        KT = kt(t, T, dz)
        LT = lt(t, T, dz)
        K2 = k2t(t, T, dx)
        G = x[2] + 1.0 / H_s
        out = np.empty(4)
        out[0] = x[1]
        out[1] = -2.0 * KT * lag[1, 1] - LT * (lag[1, 0] + x[2] * H_s * lag[0, 0])
        out[2] = K2 * lag[2, 3] * G * G
        out[3] = -K2 * lag[2, 3]
        return out
    return kernel


def make_averaged_multi_kernel(kt=kt_kernel, lt=lt_kernel, k2t=k2t_kernel):
    @njit
    def kernel(t, x, lag, p):
        n = int(p[0])
        T, dz, dx = p[1], p[2], p[3]
        H_s = p[4:4 + n * n].reshape((n, n))
        H_inv = p[4 + n * n:4 + 2 * n * n].reshape((n, n))
        KT = kt(t, T, dz)
        LT = lt(t, T, dz)
        K2 = k2t(t, T, dx)
        th = x[0:n]
        Gt = x[2 * n:2 * n + n * n].reshape((n, n))
        G = Gt + H_inv
        H_lag = lag[1, 2 * n + n * n:].reshape((n, n))
        out = np.empty(x.size)
        out[0:n] = x[n:2 * n]
        out[n:2 * n] = -2.0 * KT * lag[0, n:2 * n] - LT * (lag[0, 0:n] + Gt @ (H_s @ th))
        out[2 * n:2 * n + n * n] = (K2 * (G @ H_lag @ G)).ravel()
        out[2 * n + n * n:] = (-K2 * H_lag).ravel()
        return out
    return kernel


def make_averaged_alt_kernel(kt=kt_kernel, k4t=k4t_kernel):
    @njit
    def kernel(t, x, lag, p):
        H_s, T, dz, dx = p[0], p[1], p[2], p[3]
        KT = kt(t, T, dz)
        K4 = k4t(t, T, dx)
        G = x[1] + 1.0 / H_s
        out = np.empty(3)
        out[0] = -KT * G * H_s * lag[0, 0]
        out[1] = K4 * G * G * lag[1, 2]
        out[2] = -K4 * lag[1, 2]
        return out
    return kernel


averaged_scalar_kernel = make_averaged_scalar_kernel()
averaged_multi_kernel = make_averaged_multi_kernel()
averaged_alt_kernel = make_averaged_alt_kernel()


# -- states and problems -----------------------------------------------------

@dataclass(frozen=True)
class AveragedScalarState:
    theta: float
    z: float
    Gamma: float
    H: float

    @classmethod
    def from_estimates(cls, theta_hat, z, Gamma, H_hat, theta_star, H_star) -> "AveragedScalarState":
        return cls(theta_hat - theta_star, z, Gamma - 1.0 / H_star, H_hat - H_star)

    def as_array(self) -> np.ndarray:
        return np.array([self.theta, self.z, self.Gamma, self.H])


def averaged_scalar_params(H_star: float, D: float, sched: GainSchedule) -> np.ndarray:
    return np.array([H_star, D, sched.T, sched.delta_zeta, sched.delta_xi])


def averaged_rhs(t, state, lagged, H_star, D, sched, kernel=None):
    """Averaged scalar derivative; ``lagged`` rows are t-D, t-T, t-2T."""
    kernel = averaged_scalar_kernel if kernel is None else kernel
    return kernel(t, np.asarray(state, float), np.asarray(lagged, float),
                  averaged_scalar_params(H_star, D, sched))


def averaged_scalar_problem(H_star: float, D: float, sched: GainSchedule, init, history=None,
                            kernel=None) -> RfdeProblem:
    if not sched.T > D:
        raise ValueError(f"need T > D, got T = {sched.T}, D = {D}")
    x0 = init.as_array() if hasattr(init, "as_array") else np.asarray(init, float)
    return RfdeProblem(averaged_scalar_kernel if kernel is None else kernel, 4, (D, sched.T, 2 * sched.T),
                       x0 if history is None else history, averaged_scalar_params(H_star, D, sched))


def averaged_multi_params(H_star: np.ndarray, sched: GainSchedule) -> np.ndarray:
    H = np.asarray(H_star, float)
    n = H.shape[0]
    return np.concatenate([[n, sched.T, sched.delta_zeta, sched.delta_xi], H.ravel(),
                           np.linalg.inv(H).ravel()])


def averaged_multi_rhs(t, state, lagged, H_star, sched, kernel=None):
    """Averaged vector derivative; ``lagged`` rows are t-T and t-2T."""
    kernel = averaged_multi_kernel if kernel is None else kernel
    return kernel(t, np.asarray(state, float), np.asarray(lagged, float), averaged_multi_params(H_star, sched))


def averaged_multi_initial(theta_hat, z, Gamma, H_hat, theta_star, H_star) -> np.ndarray:
    H_star = np.asarray(H_star, float)
    return np.concatenate([np.asarray(theta_hat, float) - theta_star, np.asarray(z, float),
                           (np.asarray(Gamma, float) - np.linalg.inv(H_star)).ravel(),
                           (np.asarray(H_hat, float) - H_star).ravel()])


def averaged_multi_problem(H_star, sched: GainSchedule, x0, history=None, kernel=None) -> RfdeProblem:
    n = np.asarray(H_star).shape[0]
    return RfdeProblem(averaged_multi_kernel if kernel is None else kernel, n * (2 + 2 * n),
                       (sched.T, 2 * sched.T), np.asarray(x0, float) if history is None else history,
                       averaged_multi_params(H_star, sched))


def averaged_alt_params(H_star: float, sched: GainSchedule) -> np.ndarray:
    return np.array([H_star, sched.T, sched.delta_zeta, sched.delta_xi])


def averaged_alt_rhs(t, state, lagged, H_star, sched, kernel=None):
    """Averaged alternative derivative; ``lagged`` rows are t-T and t-4T."""
    kernel = averaged_alt_kernel if kernel is None else kernel
    return kernel(t, np.asarray(state, float), np.asarray(lagged, float), averaged_alt_params(H_star, sched))


def averaged_alt_problem(H_star: float, sched: GainSchedule, x0, history=None, kernel=None) -> RfdeProblem:
    return RfdeProblem(averaged_alt_kernel if kernel is None else kernel, 3, (sched.T, 4 * sched.T),
                       np.asarray(x0, float) if history is None else history,
                       averaged_alt_params(H_star, sched))


# -- target system -----------------------------------------------------------

def _lagged_rows(traj: Trajectory, delay: float) -> slice:
    m = int(round(delay / traj.step))
    if m > traj.n_history:
        raise ValueError(f"delay {delay} reaches before the stored history")
    return slice(traj.n_history - m, traj.states.shape[0] - m)


def target_transform(traj: Trajectory, sched: GainSchedule):
    """``x1 = theta~``, ``x2 = K_T theta~(t-T) + z`` on the solution grid.

    Returns ``(t, x1, x2)``.
    """
    t, X = traj.solution()
    th_T = traj.states[_lagged_rows(traj, sched.T), 0]
    return t, X[:, 0].copy(), kt_kernel(t, sched.T, sched.delta_zeta) * th_T + X[:, 1]


def target_residuals(traj: Trajectory, sched: GainSchedule, H_star: float, D: float):
    """Residuals of the target equations along an averaged scalar trajectory.

        x1' + K_T x1(t-T) - x2                          (r1)
        x2' + K_T x2(t-T) + L_T Gamma~ H* x1(t-D)       (r2)

    Derivatives come from the stored node derivatives and the chain rule;
    the second residual needs ``t >= T`` so that ``x2(t-T)`` is defined.
    """
    T, dz = sched.T, sched.delta_zeta
    t, X = traj.solution()
    F = traj.derivatives[traj.n_history:]
    rT = _lagged_rows(traj, T)
    th_T, dth_T = traj.states[rT, 0], traj.derivatives[rT, 0]
    th_D = traj.states[_lagged_rows(traj, D), 0]
    KT = kt_kernel(t, T, dz)
    LT = lt_kernel(t, T, dz)
    x1, x2 = X[:, 0], KT * th_T + X[:, 1]
    r1 = F[:, 0] + KT * th_T - x2

    ok = t >= T - 1e-12
    k = int(round(T / traj.step))
    x2_T = np.full_like(x2, np.nan)
    x2_T[k:] = x2[:-k] if k else x2
    dx2 = LT * th_T + KT * dth_T + F[:, 1]
    r2 = dx2 + KT * x2_T + LT * X[:, 2] * H_star * th_D
    return t, r1, np.where(ok, r2, np.nan)
