"""Fixed-step RK4 for retarded functional differential equations.

The equations have the form

    x'(t) = f(t, x(t), [x(t - r_1), ..., x(t - r_m)], params),   t >= 0
    x(s)  = phi(s),                                              s in [-r_max, 0]

with every delay an integer multiple of the step.  Delayed arguments at the
RK4 half-step are read off a cubic Hermite interpolant built from stored node
values and derivatives, so the lagged values seen by the stages are the same
dense output that :meth:`Trajectory.lookup` returns.  A zero delay means the
current stage state.

The derivative at t = 0 is two-sided: queries on [-h, 0] use the derivative of
the history, queries on [0, h] use f evaluated at t = 0.

If ``rhs`` is a numba-jitted function the stepping loop runs compiled.  Any
other callable goes through the same loop in interpreted Python.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from numba import njit
from numba.extending import is_jitted

STEPS_PER_PERIOD = 40
MULTIPLE_RTOL = 1e-12
MIN_GRID_FRACTION = 1e-6


class StepError(ValueError):
    """Step incompatible with the delays or the fastest dither."""

    def __init__(self, message: str, suggestion: float | None):
        super().__init__(message if suggestion is None else f"{message}; try step = {suggestion:.17g}")
        self.suggestion = suggestion


class IntegrationError(FloatingPointError):
    def __init__(self, t: float):
        super().__init__(f"non-finite state at t = {t:.17g}")
        self.t = t


def _is_multiple(r: float, h: float) -> bool:
    k = round(r / h)
    return k >= 1 and abs(k * h - r) <= MULTIPLE_RTOL * r


def _common_grid(delays: Sequence[float]) -> Fraction | None:
    """Largest step dividing every positive delay, or None if unrelated."""
    g = None
    for r in delays:
        if r <= 0:
            continue
        f = Fraction(r).limit_denominator(10**9)
        if abs(float(f) - r) > MULTIPLE_RTOL * r:
            return None
        g = f if g is None else Fraction(math.gcd(f.numerator * g.denominator, g.numerator * f.denominator),
                                         f.denominator * g.denominator)
    # a grid this fine only exists by rational approximation of unrelated delays
    if g is not None and g < MIN_GRID_FRACTION * max(delays):
        return None
    return g


def suggest_step(step: float, delays: Sequence[float], omega_max: float | None = None) -> float | None:
    """Largest step not above ``step`` meeting the delay and resolution rules."""
    cap = step
    if omega_max:
        cap = min(cap, 2 * math.pi / omega_max / STEPS_PER_PERIOD)
    g = _common_grid(delays)
    if g is None:
        if any(r > 0 for r in delays):
            return None
        return cap
    return float(g) / math.ceil(float(g) / cap * (1 - 1e-15))


def validate_step(step: float, delays: Sequence[float], omega_max: float | None = None) -> None:
    """Raise StepError unless ``step`` divides every delay and resolves ``omega_max``."""
    if not step > 0:
        raise StepError(f"step must be positive, got {step}", None)
    for r in delays:
        if r < 0:
            raise StepError(f"negative delay {r}", None)
        if r > 0 and not _is_multiple(r, step):
            raise StepError(f"delay {r:.17g} is not an integer multiple of step {step:.17g}",
                            suggest_step(step, delays, omega_max))
    if omega_max and step > 2 * math.pi / omega_max / STEPS_PER_PERIOD * (1 + 1e-12):
        raise StepError(f"step {step:.17g} resolves the fastest dither (omega = {omega_max:.17g}) "
                        f"with fewer than {STEPS_PER_PERIOD} points per period",
                        suggest_step(step, delays, omega_max))


@dataclass
class RfdeProblem:
    """An RFDE with ``rhs(t, x, lagged, params) -> dx``.

    ``lagged[k]`` holds ``x(t - delays[k])``.  ``history`` is either a
    constant vector or a callable ``s -> x(s)`` on ``[-max(delays), 0]``.
    """

    rhs: Callable
    dimension: int
    delays: tuple
    history: object
    params: np.ndarray = field(default_factory=lambda: np.zeros(0))
    history_derivative: Callable | None = None

    def __post_init__(self):
        self.delays = tuple(float(r) for r in self.delays)
        if any(r < 0 for r in self.delays):
            raise ValueError("delays must be nonnegative")
        self.params = np.ascontiguousarray(self.params, dtype=float)

    @property
    def max_delay(self) -> float:
        return max(self.delays, default=0.0)


@njit(cache=True)
def _hermite(y0, y1, d0, d1, h, theta):
    t2 = theta * theta
    t3 = t2 * theta
    return ((2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + theta) * h * d0
            + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * h * d1)


@njit(cache=True)
def _fill_node(lag, X, j, lag_steps, xcur):
    for k in range(lag_steps.size):
        m = lag_steps[k]
        if m == 0:
            lag[k, :] = xcur
        else:
            lag[k, :] = X[j - m]


@njit(cache=True)
def _fill_mid(lag, X, F, i, i0, lag_steps, hist_d0, h, xcur):
    for k in range(lag_steps.size):
        m = lag_steps[k]
        if m == 0:
            lag[k, :] = xcur
        else:
            left = i - m
            right = left + 1
            d1 = hist_d0 if right == i0 else F[right]
            lag[k, :] = 0.5 * (X[left] + X[right]) + 0.125 * h * (F[left] - d1)


@njit
def _rk4_loop(rhs, params, X, F, i0, n_steps, h, lag_steps, hist_d0):
    """Advance from node ``i0`` (t = 0).  Returns the failing node or -1."""
    d = X.shape[1]
    lag = np.empty((lag_steps.size, d))
    _fill_node(lag, X, i0, lag_steps, X[i0])
    F[i0] = rhs(0.0, X[i0], lag, params)
    for n in range(n_steps):
        i = i0 + n
        t = n * h
        tm = (n + 0.5) * h
        tn = (n + 1) * h
        k1 = F[i]
        xs = X[i] + 0.5 * h * k1
        _fill_mid(lag, X, F, i, i0, lag_steps, hist_d0, h, xs)
        k2 = rhs(tm, xs, lag, params)
        xs = X[i] + 0.5 * h * k2
        _fill_mid(lag, X, F, i, i0, lag_steps, hist_d0, h, xs)
        k3 = rhs(tm, xs, lag, params)
        xs = X[i] + h * k3
        _fill_node(lag, X, i + 1, lag_steps, xs)
        k4 = rhs(tn, xs, lag, params)
        xn = X[i] + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        for c in range(d):
            if not np.isfinite(xn[c]):
                return i + 1
        X[i + 1] = xn
        _fill_node(lag, X, i + 1, lag_steps, xn)
        fn = rhs(tn, xn, lag, params)
        for c in range(d):
            if not np.isfinite(fn[c]):
                return i + 1
        F[i + 1] = fn
    return -1


@dataclass
class Trajectory:
    """Node values and derivatives on ``t_k = (k - n_history) h``.

    Rows before ``n_history`` are the sampled initial history.
    """

    step: float
    n_history: int
    states: np.ndarray
    derivatives: np.ndarray
    history_derivative0: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return (np.arange(self.states.shape[0]) - self.n_history) * self.step

    @property
    def t_end(self) -> float:
        return (self.states.shape[0] - 1 - self.n_history) * self.step

    def solution(self):
        """``(times, states)`` restricted to t >= 0."""
        return self.times[self.n_history:], self.states[self.n_history:]

    def index_of(self, t: float) -> int:
        """Index of the node at time ``t`` (must lie on the grid)."""
        k = t / self.step + self.n_history
        i = int(round(k))
        if abs(k - i) > 1e-6:
            raise ValueError(f"t = {t} is not a grid node")
        return i

    def lookup(self, t):
        """Hermite dense output at time(s) ``t`` within the stored span."""
        scalar = np.ndim(t) == 0
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        k = ts / self.step + self.n_history
        last = self.states.shape[0] - 1
        if np.any(k < -1e-9) or np.any(k > last + 1e-9):
            raise ValueError("lookup outside the stored span "
                             f"[{-self.n_history * self.step}, {self.t_end}]")
        i = np.clip(np.floor(k).astype(np.int64), 0, max(last - 1, 0))
        theta = np.clip(k - i, 0.0, 1.0)
        if last == 0:
            out = np.repeat(self.states[:1], ts.size, axis=0)
        else:
            d0 = self.derivatives[i].copy()
            d1 = self.derivatives[i + 1].copy()
            # left of t = 0 the history-side derivative applies
            d1[i + 1 == self.n_history] = self.history_derivative0
            out = _hermite(self.states[i], self.states[i + 1], d0, d1, self.step, theta[:, None])
            exact_l = theta <= 1e-12
            exact_r = theta >= 1 - 1e-12
            out[exact_l] = self.states[i[exact_l]]
            out[exact_r] = self.states[i[exact_r] + 1]
        return out[0] if scalar else out


def _sample_history(problem: RfdeProblem, n_hist: int, h: float):
    d = problem.dimension
    ts = (np.arange(n_hist + 1) - n_hist) * h
    ts[-1] = 0.0
    if callable(problem.history):
        X = np.array([np.asarray(problem.history(s), dtype=float).reshape(d) for s in ts])
        if problem.history_derivative is not None:
            F = np.array([np.asarray(problem.history_derivative(s), dtype=float).reshape(d) for s in ts])
        else:
            F = _numerical_derivative(problem.history, ts, h, d)
    else:
        x0 = np.asarray(problem.history, dtype=float).reshape(d)
        X = np.repeat(x0[None, :], n_hist + 1, axis=0)
        F = np.zeros_like(X)
    return X, F


def _numerical_derivative(fun, ts, h, d):
    # central differences inside the history interval, one-sided at the ends
    eps = 1e-5 * max(h, 1e-3)
    lo = ts[0]
    out = np.empty((ts.size, d))
    for k, s in enumerate(ts):
        a = max(s - eps, lo) if ts.size > 1 else s - eps
        b = min(s + eps, 0.0)
        if b == a:
            a = s - eps
        out[k] = (np.asarray(fun(b), dtype=float) - np.asarray(fun(a), dtype=float)).reshape(d) / (b - a)
    return out


def integrate(problem: RfdeProblem, t_end: float, step: float, omega_max: float | None = None) -> Trajectory:
    """Integrate ``problem`` on ``[0, t_end]`` with fixed step ``step``."""
    validate_step(step, problem.delays, omega_max)
    if t_end < 0:
        raise ValueError("t_end must be nonnegative")
    n_steps = int(round(t_end / step))
    if abs(n_steps * step - t_end) > 1e-9 * max(t_end, step):
        n_steps = math.ceil(t_end / step)
    lag_steps = np.array([int(round(r / step)) for r in problem.delays], dtype=np.int64)
    n_hist = int(lag_steps.max()) if lag_steps.size else 0

    Xh, Fh = _sample_history(problem, n_hist, step)
    rows = n_hist + n_steps + 1
    X = np.empty((rows, problem.dimension))
    F = np.empty((rows, problem.dimension))
    X[: n_hist + 1] = Xh
    F[:n_hist] = Fh[:n_hist]
    hist_d0 = Fh[n_hist].copy()

    loop = _rk4_loop if is_jitted(problem.rhs) else _rk4_loop.py_func
    bad = loop(problem.rhs, problem.params, X, F, n_hist, n_steps, step, lag_steps, hist_d0)
    if bad >= 0:
        raise IntegrationError((bad - n_hist) * step)
    return Trajectory(step, n_hist, X, F, hist_d0)


def lookup(traj: Trajectory, t):
    return traj.lookup(t)
