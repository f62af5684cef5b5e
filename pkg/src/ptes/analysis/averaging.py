"""Quadrature checks of the averaging identities.

Over one dither period, for any constant error ``chi``,

    mean(M(t) y_chi(t)) = H* chi,        mean(N(t) y_chi(t)) = H*

with ``y_chi(t) = y* + H*/2 (S_D(t-D) + chi)^2``.  The uniform-node mean is the
trapezoid rule for a periodic integrand.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..estimators.khv import khv_multi_kernel, khv_multi_params, khv_scalar_kernel, khv_scalar_params
from ..signals import dither_kernel

DEFAULT_NODES = 10_000


@dataclass(frozen=True)
class AveragingResiduals:
    gradient: float
    hessian: float


def averaging_residuals(chi: float, y_star: float, H_star: float, a: float, omega: float, D: float = 0.0,
                        nodes: int = DEFAULT_NODES) -> AveragingResiduals:
    if nodes < 2:
        raise ValueError("need at least two quadrature nodes")
    period = 2 * np.pi / omega
    t = np.arange(nodes) * (period / nodes)
    S, M, N = dither_kernel(t - D, a, omega, D)
    _, M, N = dither_kernel(t, a, omega, D)
    y = y_star + 0.5 * H_star * (S + chi) ** 2
    return AveragingResiduals(abs(np.mean(M * y) - H_star * chi), abs(np.mean(N * y) - H_star))


def _to_physical_scalar(state, theta_star, H_star):
    th, z, G, H = state
    return np.array([th + theta_star, z, G + 1.0 / H_star, H + H_star])


def period_average_scalar(t, state, lagged, plant, dither, sched, nodes: int = 2000) -> np.ndarray:
    """Mean over one dither period of the full scalar right-hand side.

    ``state`` and ``lagged`` are in error coordinates; gains and delayed
    arguments stay frozen while the dither clock sweeps a period.
    """
    x = _to_physical_scalar(state, plant.theta_star, plant.H_star)
    lag = np.array([_to_physical_scalar(r, plant.theta_star, plant.H_star) for r in lagged])
    period = 2 * np.pi / dither.omega
    acc = np.zeros(4)
    for k in range(nodes):
        p = khv_scalar_params(plant, dither, sched, dither_offset=k * period / nodes)
        acc += khv_scalar_kernel(t, x, lag, p)
    return acc / nodes


def period_average_multi(t, state, lagged, plant, dither, sched, nodes: int = 2000) -> np.ndarray:
    """Vector analogue of :func:`period_average_scalar` over the common period."""
    n = plant.n
    H_inv = np.linalg.inv(plant.H_star)

    def phys(v):
        v = np.asarray(v, float)
        return np.concatenate([v[:n] + plant.theta_star, v[n:2 * n],
                               v[2 * n:2 * n + n * n] + H_inv.ravel(), v[2 * n + n * n:] + plant.H_star.ravel()])

    x = phys(state)
    lag = np.array([phys(r) for r in lagged])
    period = dither.period
    acc = np.zeros(x.size)
    for k in range(nodes):
        p = khv_multi_params(plant, dither, sched, dither_offset=k * period / nodes)
        acc += khv_multi_kernel(t, x, lag, p)
    return acc / nodes
