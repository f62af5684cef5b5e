"""Independent reference solutions used to cross-check the integrator."""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import solve_ivp


def kt_ref(t, T, d):
    s = math.sin(math.pi * (t + d * T) / T)
    return 2.0 / T * s * s if s < 0 else 0.0


def lt_ref(t, T, d):
    arg = math.pi * (t + d * T) / T
    s = math.sin(arg)
    return 4.0 * math.pi / T ** 2 * s * math.cos(arg) if s < 0 else 0.0


def k2t_ref(t, T, d):
    s = math.sin(math.pi * (t + 2 * d * T) / (2 * T))
    return s * s / T if s < 0 else 0.0


class MethodOfSteps:
    """Piecewise ``solve_ivp`` over segments no longer than the shortest delay.

    ``rhs(t, x, past)`` receives ``past(s)``, which returns the state at any
    ``s <= t`` from the history or from earlier dense outputs.
    """

    def __init__(self, rhs, history, min_delay, rtol=1e-11, atol=1e-13, max_step=None):
        self.rhs, self.history, self.h = rhs, history, min_delay
        self.rtol, self.atol, self.max_step = rtol, atol, max_step
        self.segments = []

    def past(self, s):
        if s <= 0:
            return np.asarray(self.history(s), float)
        for lo, hi, sol in reversed(self.segments):
            if lo - 1e-12 <= s <= hi + 1e-12:
                return sol(min(max(s, lo), hi))
        raise ValueError(f"time {s} not yet computed")

    def solve(self, t_end, breakpoints=()):
        x = np.asarray(self.history(0.0), float)
        edges = sorted(set(np.arange(0.0, t_end, self.h)) | {b for b in breakpoints if 0 < b < t_end} | {t_end})
        for lo, hi in zip(edges, edges[1:]):
            kw = {} if self.max_step is None else {"max_step": self.max_step}
            sol = solve_ivp(lambda t, y: self.rhs(t, y, self.past), (lo, hi), x, method="DOP853",
                            rtol=self.rtol, atol=self.atol, dense_output=True, **kw)
            if not sol.success:
                raise RuntimeError(sol.message)
            self.segments.append((lo, hi, sol.sol))
            x = sol.y[:, -1]
        return self

    def __call__(self, t):
        return np.array([self.past(s) for s in np.atleast_1d(t)])


def averaged_scalar_reference(H_star, D, T, dz, dx, x0, t_end):
    """Averaged scalar error dynamics solved with pure-Python gains."""

    def rhs(t, x, past):
        xD, xT, x2T = past(t - D) if D > 0 else x, past(t - T), past(t - 2 * T)
        G = x[2] + 1.0 / H_star
        K2 = k2t_ref(t, T, dx)
        return [x[1],
                -2.0 * kt_ref(t, T, dz) * xT[1] - lt_ref(t, T, dz) * (xT[0] + x[2] * H_star * xD[0]),
                K2 * x2T[3] * G * G,
                -K2 * x2T[3]]

    # gain switching instants: zeros of the two sines
    kinks = [k * T - dz * T for k in range(int(t_end / T) + 3)]
    kinks += [2 * k * T - 2 * dx * T for k in range(int(t_end / (2 * T)) + 3)]
    min_delay = min(v for v in (D, T) if v > 0)
    return MethodOfSteps(rhs, lambda s: x0, min_delay).solve(t_end, kinks)
