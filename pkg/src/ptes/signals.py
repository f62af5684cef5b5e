"""Oscillators, periodic gains and dither signals.

All gains are evaluated from the closed-form solutions of the two unit-circle
oscillators

    zeta' = R(pi/T) zeta,      xi' = R(pi/(2T)) xi,      R(s) = [[0, s], [-s, 0]]

so that every signal is a pure function of time.  The phase of an oscillator
started at u(0) on S^1 is ``delta = Delta(u1(0), u2(0))`` and the first
coordinate reads ``sin(pi (t + delta T) / T)``.

    K_T(t)  = (2/T) max{0, -zeta1 |zeta1|}            2T-periodic pulse
    L_T(t)  = -(4 pi / T^2) max{0, -zeta1} zeta2      = dK_T/dt
    K_2T(t) = (1/T) max{0, -xi1 |xi1|}                4T-periodic pulse

The ``*_kernel`` functions are numba ufuncs: they accept scalars or arrays
and are callable from the jitted estimator right-hand sides.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from numba import njit, vectorize

UNIT_CIRCLE_TOL = 1e-9
# zeta1 values this close to zero count as zero, so that K_T(t) K_T(t - T) is
# exactly 0 in floating point at the window edges (changes K_T by < 1e-19)
ZERO_CROSSING_EPS = 1e-10


# -- kernels ---------------------------------------------------------------

_SIG = ["float64(float64, float64, float64)"]


@vectorize(_SIG, cache=True)
def kt_kernel(t, T, delta):
    s = math.sin(math.pi * ((t + delta * T) / T))
    if s >= -ZERO_CROSSING_EPS:
        return 0.0
    return (2.0 / T) * s * s


@vectorize(_SIG, cache=True)
def lt_kernel(t, T, delta):
    arg = math.pi * ((t + delta * T) / T)
    s = math.sin(arg)
    if s >= -ZERO_CROSSING_EPS:
        return 0.0
    return (4.0 * math.pi / (T * T)) * s * math.cos(arg)


@vectorize(_SIG, cache=True)
def k2t_kernel(t, T, delta):
    s = math.sin(math.pi * ((t + 2.0 * delta * T) / (2.0 * T)))
    if s >= 0.0:
        return 0.0
    return (1.0 / T) * s * s


@vectorize(_SIG, cache=True)
def k4t_kernel(t, T, delta):
    # K_2T with T doubled: 8T-periodic, unit mass on each active window
    s = math.sin(math.pi * ((t + 4.0 * delta * T) / (4.0 * T)))
    if s >= 0.0:
        return 0.0
    return (0.5 / T) * s * s


# -- phase -----------------------------------------------------------------

def delta_phase(s1: float, s2: float) -> float:
    """Normalized initial phase of a point on the unit circle, in (-1, 1].

    This is the atan2 variant used to place the gain windows: an oscillator
    started at ``(sin(pi d), cos(pi d))`` has phase ``d``.
    """
    r2 = s1 * s1 + s2 * s2
    if abs(r2 - 1.0) > UNIT_CIRCLE_TOL:
        raise ValueError(f"({s1}, {s2}) is not on the unit circle (|s|^2 = {r2!r})")
    r = math.sqrt(r2)
    s1, s2 = s1 / r, s2 / r
    if s2 > 0:
        return math.atan(s1 / s2) / math.pi
    if s2 < 0:
        if s1 >= 0:
            return math.atan(s1 / s2) / math.pi + 1.0
        d = math.atan(s1 / s2) / math.pi - 1.0
        # just below the negative u2 axis the phase rounds to -1, which wraps to 1
        return 1.0 if d <= -1.0 else d
    # s2 == 0: after normalization s1 is exactly +-1
    return 0.5 if s1 > 0 else -0.5


@dataclass(frozen=True)
class OscillatorSpec:
    """Initial point on S^1 and rotation rate (rad/s)."""

    u1_0: float
    u2_0: float
    rate: float

    def __post_init__(self):
        r2 = self.u1_0**2 + self.u2_0**2
        if abs(r2 - 1.0) > 1e-12:
            raise ValueError(f"oscillator start ({self.u1_0}, {self.u2_0}) is off the unit circle")

    @property
    def delta(self) -> float:
        return delta_phase(self.u1_0, self.u2_0)


def oscillator_at(spec: OscillatorSpec, t):
    """Closed-form oscillator state ``(u1(t), u2(t))``."""
    c = np.cos(spec.rate * t)
    s = np.sin(spec.rate * t)
    return spec.u1_0 * c + spec.u2_0 * s, -spec.u1_0 * s + spec.u2_0 * c


def oscillator_from_phase(delta: float, rate: float) -> OscillatorSpec:
    return OscillatorSpec(math.sin(math.pi * delta), math.cos(math.pi * delta), rate)


# -- gains -----------------------------------------------------------------

@dataclass(frozen=True)
class GainSchedule:
    """Feedback delay ``T`` and the two oscillator phases."""

    T: float
    delta_zeta: float = 0.0
    delta_xi: float = 0.0

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T}")
        for name in ("delta_zeta", "delta_xi"):
            d = getattr(self, name)
            if not -1.0 < d <= 1.0:
                raise ValueError(f"{name} must lie in (-1, 1], got {d}")

    @classmethod
    def from_oscillators(cls, T: float, zeta0: Sequence[float], xi0: Sequence[float]) -> "GainSchedule":
        return cls(T, delta_phase(*zeta0), delta_phase(*xi0))

    @property
    def zeta(self) -> OscillatorSpec:
        return oscillator_from_phase(self.delta_zeta, math.pi / self.T)

    @property
    def xi(self) -> OscillatorSpec:
        return oscillator_from_phase(self.delta_xi, math.pi / (2 * self.T))


def gain_KT(sched: GainSchedule, t):
    return kt_kernel(t, sched.T, sched.delta_zeta)


def gain_LT(sched: GainSchedule, t):
    return lt_kernel(t, sched.T, sched.delta_zeta)


def gain_K2T(sched: GainSchedule, t):
    return k2t_kernel(t, sched.T, sched.delta_xi)


def gain_K4T(sched: GainSchedule, t):
    return k4t_kernel(t, sched.T, sched.delta_xi)


# -- dithers ---------------------------------------------------------------

@njit(cache=True)
def dither_kernel(t, a, omega, D):
    s = np.sin(omega * t)
    return a * np.sin(omega * (t + D)), (2.0 / a) * s, (16.0 / (a * a)) * (s * s - 0.5)


@dataclass(frozen=True)
class DitherSpecScalar:
    a: float
    omega: float
    D: float = 0.0

    def __post_init__(self):
        if not 0 < self.a < 1:
            raise ValueError(f"dither amplitude must lie in (0, 1), got {self.a}")
        if not self.omega > 0:
            raise ValueError(f"dither frequency must be positive, got {self.omega}")
        if self.D < 0:
            raise ValueError(f"advance D must be nonnegative, got {self.D}")


def dither_scalar(spec: DitherSpecScalar, t):
    """Probe ``S_D``, gradient demodulator ``M`` and Hessian demodulator ``N``."""
    return dither_kernel(t, spec.a, spec.omega, spec.D)


def _as_fraction(r) -> Fraction:
    if isinstance(r, float):
        # floats are taken at face value of their shortest repr, e.g. 0.1 -> 1/10
        return Fraction(repr(r))
    return Fraction(r)


@dataclass(frozen=True)
class FrequencyViolation:
    index: int
    rule: str
    others: tuple

    def __str__(self):
        return f"ratio[{self.index}] = {self.rule} with indices {self.others}"


class FrequencyError(ValueError):
    def __init__(self, violation: FrequencyViolation):
        super().__init__(f"dither frequencies not admissible: {violation}")
        self.violation = violation


def frequency_violation(ratios: Sequence) -> FrequencyViolation | None:
    """First excluded coincidence among the frequency ratios, or None.

    Exhaustive over distinct indices in exact rational arithmetic.
    """
    w = [_as_fraction(r) for r in ratios]
    if any(x <= 0 for x in w):
        raise ValueError("frequency ratios must be positive")
    n = len(w)
    for i in range(n):
        rest = [j for j in range(n) if j != i]
        for j in rest:
            if w[i] == w[j]:
                return FrequencyViolation(i, f"r[{j}]", (j,))
        for j, k in itertools.permutations(rest, 2):
            if w[i] == (w[j] + w[k]) / 2:
                return FrequencyViolation(i, f"(r[{j}] + r[{k}])/2", (j, k))
        for j, k in itertools.permutations(rest, 2):
            if w[i] == w[j] + 2 * w[k]:
                return FrequencyViolation(i, f"r[{j}] + 2 r[{k}]", (j, k))
        for j, k, l in itertools.permutations(rest, 3):
            if w[i] == w[j] + w[k] + w[l]:
                return FrequencyViolation(i, f"r[{j}] + r[{k}] + r[{l}]", (j, k, l))
            if w[i] == w[j] + w[k] - w[l]:
                return FrequencyViolation(i, f"r[{j}] + r[{k}] - r[{l}]", (j, k, l))
    return None


def validate_frequencies(ratios: Sequence) -> tuple[Fraction, ...]:
    """Return the ratios as fractions, raising FrequencyError if excluded."""
    violation = frequency_violation(ratios)
    if violation is not None:
        raise FrequencyError(violation)
    return tuple(_as_fraction(r) for r in ratios)


def common_period(ratios: Sequence, base_omega: float) -> float:
    """Common period ``2 pi LCM{1/omega_i}`` of dithers at ``ratios * base_omega``."""
    fr = [_as_fraction(r) for r in ratios]
    # LCM(1/r_i) = LCM(den_i) / GCD(num_i) for reduced fractions
    num = math.gcd(*[f.numerator for f in fr])
    den = math.lcm(*[f.denominator for f in fr])
    return 2 * math.pi * (den / num) / base_omega


@dataclass(frozen=True)
class DitherSpecMulti:
    amplitudes: tuple
    base_omega: float
    ratios: tuple = field(default=())

    def __post_init__(self):
        amps = tuple(float(a) for a in self.amplitudes)
        ratios = tuple(_as_fraction(r) for r in self.ratios) or tuple(Fraction(1) for _ in amps)
        if len(ratios) != len(amps):
            raise ValueError("amplitudes and ratios differ in length")
        if any(a == 0 for a in amps):
            raise ValueError("dither amplitudes must be nonzero")
        if not self.base_omega > 0:
            raise ValueError("base frequency must be positive")
        validate_frequencies(ratios)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "ratios", ratios)

    @property
    def n(self) -> int:
        return len(self.amplitudes)

    @property
    def omegas(self) -> np.ndarray:
        return np.array([float(r) * self.base_omega for r in self.ratios])

    @property
    def period(self) -> float:
        return common_period(self.ratios, self.base_omega)


@njit(cache=True)
def dither_multi_kernel(t, a, w):
    n = a.size
    s = np.sin(w * t)
    S = a * s
    M = 2.0 / a * s
    N = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            if i == j:
                N[i, i] = 16.0 / (a[i] * a[i]) * (s[i] * s[i] - 0.5)
            else:
                N[i, j] = 4.0 / (a[i] * a[j]) * s[i] * s[j]
    return S, M, N


def dither_multi(spec: DitherSpecMulti, t: float):
    """Vector probe ``S``, demodulator ``M`` and symmetric matrix ``N`` at ``t``."""
    return dither_multi_kernel(float(t), np.asarray(spec.amplitudes), spec.omegas)
