"""Trajectory comparisons."""

from __future__ import annotations

import numpy as np


def closeness_metric(times_a, states_a, times_b, states_b, horizon: float, columns=None) -> float:
    """Sup-norm distance of two trajectories over ``[0, horizon]``.

    The finer grid is resampled onto the coarser one; every coarse node in
    the window must coincide with a fine node.
    """
    ta, Xa = np.asarray(times_a), np.asarray(states_a)
    tb, Xb = np.asarray(times_b), np.asarray(states_b)
    if columns is not None:
        Xa, Xb = Xa[:, columns], Xb[:, columns]
    if Xa.shape[1:] != Xb.shape[1:]:
        raise ValueError("state dimensions differ")
    ha, hb = ta[1] - ta[0], tb[1] - tb[0]
    if ha < hb:
        ta, Xa, tb, Xb = tb, Xb, ta, Xa
    # a is now the coarse grid
    sel = (ta >= -1e-12) & (ta <= horizon + 1e-9)
    tc = ta[sel]
    if tc.size == 0 or tc[-1] < horizon - 1e-9 or tb[-1] < horizon - 1e-9:
        raise ValueError("trajectories do not cover the horizon")
    idx = np.searchsorted(tb, tc - 1e-9)
    idx = np.clip(idx, 0, tb.size - 1)
    h = tb[1] - tb[0]
    if np.any(np.abs(tb[idx] - tc) > 1e-6 * h):
        raise ValueError("grid mismatch after resampling")
    diff = Xa[sel] - Xb[idx]
    return float(np.max(np.linalg.norm(diff.reshape(diff.shape[0], -1), axis=1)))


def riccati_relation_residual(Gamma_err, H_err, H_star):
    """``|Gamma~ + 1/H* - 1/(H~ + H*)|`` (scalar case, vectorized)."""
    G = np.asarray(Gamma_err, float)
    Hs = np.asarray(H_err, float) + H_star
    if np.any(np.abs(Hs) < 1e-12):
        raise ZeroDivisionError("H~ + H* is singular")
    return np.abs(G + 1.0 / H_star - 1.0 / Hs)


def settling_time(times, norms, tol: float):
    """First time after which ``norms <= tol`` holds to the end, or None."""
    norms = np.asarray(norms)
    above = np.nonzero(norms > tol)[0]
    if above.size == 0:
        return float(times[0])
    if above[-1] == norms.size - 1:
        return None
    return float(times[above[-1] + 1])


def classify_settling(t_settle, T: float, multiples=(4, 6), tol: float = 0.25) -> str:
    """Label a settling time by the nearest listed multiple of ``T``.

    Returns e.g. ``"6T"`` when ``|t_settle - 6T| <= tol T``, ``"neither"``
    when no multiple is that close, and ``"not settled"`` for None.
    """
    if t_settle is None:
        return "not settled"
    for m in multiples:
        if abs(t_settle - m * T) <= tol * T:
            return f"{m}T"
    return "neither"
