"""Static quadratic maps behind an input delay.

    y(t) = y* + (H*/2) (theta(t - D) - theta*)^2                        scalar
    y(t) = y* + 1/2 (theta(t) - theta*)^T H* (theta(t) - theta*)        vector
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class QuadraticMapScalar:
    y_star: float
    theta_star: float
    H_star: float
    D: float = 0.0

    def __post_init__(self):
        if self.H_star == 0:
            raise ValueError("H* must be nonzero")
        if self.D < 0:
            raise ValueError("input delay must be nonnegative")

    def __call__(self, theta_delayed):
        """Output given the already-delayed input ``theta(t - D)``."""
        e = np.asarray(theta_delayed) - self.theta_star
        return self.y_star + 0.5 * self.H_star * e * e

    @property
    def gradient_scale(self) -> float:
        return self.H_star


@dataclass(frozen=True)
class QuadraticMapMulti:
    y_star: float
    theta_star: np.ndarray
    H_star: np.ndarray

    def __post_init__(self):
        th = np.asarray(self.theta_star, dtype=float).reshape(-1)
        H = np.asarray(self.H_star, dtype=float)
        if H.shape != (th.size, th.size):
            raise ValueError(f"H* has shape {H.shape}, expected {(th.size, th.size)}")
        if not np.allclose(H, H.T, rtol=0, atol=1e-12 * max(1.0, np.abs(H).max())):
            raise ValueError("H* must be symmetric")
        if abs(np.linalg.det(H)) < 1e-12:
            raise ValueError("H* must be invertible")
        object.__setattr__(self, "theta_star", th)
        object.__setattr__(self, "H_star", H)

    @property
    def n(self) -> int:
        return self.theta_star.size

    @property
    def D(self) -> float:
        return 0.0

    def __call__(self, theta):
        e = np.asarray(theta, dtype=float) - self.theta_star
        return self.y_star + 0.5 * e @ self.H_star @ e


def map_output(plant, theta_delayed):
    return plant(theta_delayed)
