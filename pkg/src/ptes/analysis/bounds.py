"""Input-to-state bounds for the periodic delayed-feedback integrator.

For ``x' = -K_T(t) x(t-T) + v(t)`` with phase ``delta`` and history sup ``phi``

    |x(t)| <= e^6 sigma(t - (2T - delta T)) phi + 6 T e^6 sup_{[0,t]} |v|
    |u(t)| <= (2/T) e^6 sigma(.) phi + 12 e^6 sup_{[0,t]} |v|

where ``u = -K_T x(t-T)`` and ``sigma(s) = 1`` for ``s < 0``, else 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import maximum_filter1d

E6 = math.exp(6.0)


@dataclass(frozen=True)
class IssParams:
    T: float
    delta: float = 0.0


def _sigma(s):
    return np.where(np.asarray(s) < 0, 1.0, 0.0)


def iss_bound(params: IssParams, t, phi_sup: float, v_sup) -> np.ndarray:
    """State bound at ``t``; ``v_sup`` is the running sup of |v| on [0, t]."""
    T, d = params.T, params.delta
    return E6 * _sigma(np.asarray(t) - (2 * T - d * T)) * phi_sup + 6 * T * E6 * np.asarray(v_sup)


def iss_control_bound(params: IssParams, t, phi_sup: float, v_sup) -> np.ndarray:
    T, d = params.T, params.delta
    return (2 / T) * E6 * _sigma(np.asarray(t) - (2 * T - d * T)) * phi_sup + 12 * E6 * np.asarray(v_sup)


def deadbeat_time(params: IssParams, t_vanish: float) -> float:
    """Time from which ``x = 0`` when ``v`` vanishes after ``t_vanish``.

    Valid for any history.  With ``delta > 0`` the first active window reads
    the history, so a constant history settles one period ``2T`` earlier
    when ``t_vanish = 0``.
    """
    T, d = params.T, params.delta
    return 2 * T - d * T + 2 * T * math.ceil((t_vanish + d * T) / (2 * T) - 1e-12)


def running_sup(values) -> np.ndarray:
    return np.maximum.accumulate(np.abs(np.asarray(values)))


def claim1_bound_check(times, x1, D: float, t_end: float) -> float:
    """``max_{t in [0, t_end]} sup_{s in [-D, 0]} |x1(t + s)|`` on a uniform grid.

    ``times`` must start at or before ``-D`` so every window is stored.
    """
    times = np.asarray(times)
    x1 = np.asarray(x1)
    if times[0] > -D + 1e-12 or times[-1] < t_end - 1e-12:
        raise ValueError("trajectory does not cover [-D, t_end]")
    h = times[1] - times[0]
    w = int(round(D / h)) + 1
    # trailing window [t - D, t] ending at each node
    sup = maximum_filter1d(np.abs(x1), size=w, origin=(w - 1) // 2) if w > 1 else np.abs(x1)
    sel = (times >= -1e-12) & (times <= t_end + 1e-12)
    val = float(sup[sel].max())
    if not math.isfinite(val):
        raise ValueError("non-finite state in window")
    return val
