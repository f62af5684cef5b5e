"""Named numerical property checks.

Each check returns a :class:`CheckResult`.  Checks that integrate averaged
dynamics accept replacement gain functions so that a perturbed gain can be
shown to break them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad, solve_ivp

from . import analysis as an
from . import estimators as es
from .dde import RfdeProblem, integrate
from .plant import QuadraticMapMulti, QuadraticMapScalar
from .signals import (DitherSpecMulti, DitherSpecScalar, GainSchedule, common_period, delta_phase,
                      frequency_violation, k2t_kernel, kt_kernel, lt_kernel, oscillator_at,
                      oscillator_from_phase)

# reference scalar problem
Y_STAR, THETA_STAR, H_STAR, D_REF, A_REF, OMEGA_REF = 5.0, 2.0, -0.8, 5.0, 0.5, 1000.0


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def _rng(seed=20240501):
    return np.random.default_rng(seed)


# -- gains -----------------------------------------------------------------

def check_gain_orthogonality() -> CheckResult:
    worst = 0.0
    for T in (1.0, 6.25, 3.75, 0.37):
        for d in (0.0, 0.3, -0.5, 1.0, 0.5, -0.9):
            t = np.linspace(0.0, 10 * T, 40_001)
            worst = max(worst, float(np.max(np.abs(kt_kernel(t, T, d) * kt_kernel(t - T, T, d)))))
    return CheckResult("gain_orthogonality", worst == 0.0, f"max |K_T(t) K_T(t-T)| = {worst:.3g}")


def _active_window_mass(fun, T, delta, scale):
    # windows [t_n + scale T, t_(n+1)] with t_n = 2 scale T n - 2 scale T delta / 2
    period = 2 * scale * T
    start = -delta * scale * T
    errs = []
    for n in range(5):
        lo = start + period * n + scale * T
        hi = start + period * (n + 1)
        mass = quad(lambda s: fun(s, T, delta), lo, hi, epsabs=1e-13, epsrel=1e-13, limit=200)[0]
        errs.append(abs(mass - 1.0))
    return max(errs)


def check_pulse_mass() -> CheckResult:
    worst = 0.0
    for T, d in ((1.0, 0.0), (6.25, 0.0), (3.75, 0.4), (2.0, -0.7)):
        worst = max(worst, _active_window_mass(kt_kernel, T, d, 1.0))
        # K_2T uses scale 2 with phase delta_xi: windows shift by 2 delta T
        worst = max(worst, _active_window_mass(k2t_kernel, T, d, 2.0))
    return CheckResult("pulse_mass", worst <= 1e-8, f"max |mass - 1| over five windows = {worst:.3g}")


def check_lt_derivative() -> CheckResult:
    rng = _rng(1)
    worst = 0.0
    for _ in range(200):
        T = rng.uniform(0.5, 8)
        d = rng.uniform(-0.99, 1)
        t = rng.uniform(0, 10 * T)
        arg = math.pi * (t + d * T) / T
        if abs(math.sin(arg)) < 1e-3:
            continue
        h = 1e-6 * T
        fd = (kt_kernel(t + h, T, d) - kt_kernel(t - h, T, d)) / (2 * h)
        worst = max(worst, abs(fd - lt_kernel(t, T, d)) * T * T)
    return CheckResult("lt_is_derivative_of_kt", worst <= 1e-6, f"max scaled |dK_T/dt - L_T| = {worst:.3g}")


def check_gain_periodicity() -> CheckResult:
    worst = 0.0
    for T, dz, dx in ((1.0, 0.0, 0.0), (6.25, 0.3, -0.4), (3.75, 1.0, 0.5)):
        t = np.linspace(0, 20 * T, 10_001)
        worst = max(worst,
                    float(np.max(np.abs(kt_kernel(t + 2 * T, T, dz) - kt_kernel(t, T, dz)))) * T,
                    float(np.max(np.abs(lt_kernel(t + 2 * T, T, dz) - lt_kernel(t, T, dz)))) * T * T,
                    float(np.max(np.abs(k2t_kernel(t + 4 * T, T, dx) - k2t_kernel(t, T, dx)))) * T)
    return CheckResult("gain_periodicity", worst <= 1e-9, f"max scaled periodicity defect = {worst:.3g}")


def check_phase_recovery() -> CheckResult:
    d = np.linspace(-0.999, 1.0, 2001)
    err = max(abs(delta_phase(math.sin(math.pi * x), math.cos(math.pi * x)) - x) for x in d)
    edges = [delta_phase(0, 1), delta_phase(1, 0), delta_phase(0, -1), delta_phase(-1, 0)]
    ok = err <= 1e-12 and edges == [0.0, 0.5, 1.0, -0.5]
    return CheckResult("phase_recovery", ok, f"max |Delta - delta| = {err:.3g}, edges {edges}")


def check_oscillator() -> CheckResult:
    worst_norm = worst_ode = 0.0
    for d, rate in ((0.0, math.pi), (0.37, math.pi / 2.5), (-0.8, 2.0)):
        spec = oscillator_from_phase(d, rate)
        t = np.linspace(0, 40, 801)
        u1, u2 = oscillator_at(spec, t)
        worst_norm = max(worst_norm, float(np.max(np.abs(u1 ** 2 + u2 ** 2 - 1))))
        sol = solve_ivp(lambda s, u: [rate * u[1], -rate * u[0]], (0, 40), [spec.u1_0, spec.u2_0],
                        t_eval=t, rtol=1e-11, atol=1e-12, method="DOP853")
        worst_ode = max(worst_ode, float(np.max(np.abs(sol.y - np.vstack([u1, u2])))))
    ok = worst_norm <= 1e-9 and worst_ode <= 1e-8
    return CheckResult("oscillator_closed_form", ok,
                       f"max ||u|^2 - 1| = {worst_norm:.3g}, max ODE mismatch = {worst_ode:.3g}")


def check_averaging_identities() -> CheckResult:
    worst = 0.0
    for chi in (-2.0, -0.5, 0.0, 1.0, 3.0):
        r = an.averaging_residuals(chi, Y_STAR, H_STAR, A_REF, OMEGA_REF, D_REF)
        worst = max(worst, r.gradient, r.hessian)
    return CheckResult("averaging_identities", worst <= 1e-6, f"max residual = {worst:.3g}")


def check_frequency_rules() -> CheckResult:
    ok_pair = frequency_violation([50, 70]) is None
    bad = frequency_violation([2, 3, 4])
    period = common_period([50, 70], 1.0)
    ok = ok_pair and bad is not None and abs(period - math.pi / 5) <= 1e-15
    return CheckResult("frequency_rules", ok,
                       f"(50,70) accepted: {ok_pair}; (2,3,4): {bad}; common period = {period:.17g}")


def check_timing_identities() -> CheckResult:
    a = es.select_T(5.0, 0.0, 0.0, 40.0)
    b = es.select_T(0.0, 0.0, 0.0, 30.0)
    sa = a.settling
    ok = (a.T == 6.25 and b.T == 3.75 and sa.t_hessian == 25.0 and sa.tau1 == 50.0 and sa.tau2 == 37.5
          and sa.t_theta == sa.tau1)
    try:
        es.select_T(5.0, 0.0, 0.0, 30.0)
        ok = False
    except ValueError:
        pass
    rng = _rng(2)
    worst = 0.0
    for _ in range(200):
        dz, dx = rng.uniform(-0.999, 1), rng.uniform(-0.999, 1)
        D = rng.uniform(0, 5)
        c = es.timing._ceil_term(dz, dx)
        T_star = (2 - dz + 2 * c) * D + rng.uniform(0.1, 50)
        tim = es.select_T(D, dz, dx, T_star)
        st = tim.settling
        worst = max(worst, abs(st.tau1 - st.t_theta) / st.t_theta)
        ok = ok and tim.T > D
    ok = ok and worst <= 1e-12
    return CheckResult("timing_identities", ok, f"T = {a.T}, {b.T}; max |tau1 - (T* + 2D)|/tau1 = {worst:.3g}")


# -- dead-beat and ISS -------------------------------------------------------

def check_lemma1_deadbeat() -> CheckResult:
    sched = GainSchedule(1.0)
    tr = integrate(es.lemma1_problem(sched, -1.0), 4.0, 1e-3)
    t, x = tr.solution()
    e1 = float(np.max(np.abs(x[t >= 2 - 1e-12, 0])))
    v = es.PiecewiseConstant((0.0, 1.0), (1.0, 0.0))
    tr = integrate(es.lemma1_problem(sched, -1.0, v), 8.0, 1e-3)
    t, x = tr.solution()
    e2 = float(np.max(np.abs(x[t >= 4 - 1e-12, 0])))
    ok = e1 <= 1e-9 and e2 <= 1e-9
    return CheckResult("lemma1_deadbeat", ok, f"max |x| after 2T: {e1:.3g}; after 4T with input: {e2:.3g}")


def random_history(rng, T, constant: bool):
    c0 = rng.uniform(-2, 2)
    if constant:
        return c0
    amp = rng.uniform(-1, 1, 3)
    freq = rng.uniform(0.2, 3.0, 3) / T

    def phi(s):
        return np.array([c0 + np.sum(amp * np.sin(freq * s))])
    return phi


def check_iss_domination(runs: int = 20) -> CheckResult:
    rng = _rng(3)
    worst_x = worst_u = worst_db = 0.0
    for k in range(runs):
        T = rng.uniform(0.5, 2.0)
        # history before t = 0 only enters for delta <= 0 unless it is constant
        delta = rng.uniform(-0.99, 0.0) if k % 2 == 0 else rng.uniform(0.0, 1.0)
        hist = random_history(rng, T, constant=k % 2 == 1)
        t_v = rng.uniform(0.2, 4.0) * T
        nb = int(rng.integers(1, 5))
        breaks = np.concatenate([[0.0], np.sort(rng.uniform(0, t_v, nb - 1)), [t_v]])
        values = np.concatenate([rng.uniform(-1, 1, nb), [0.0]])
        v = es.PiecewiseConstant(tuple(breaks), tuple(values))
        sched = GainSchedule(T, delta)
        h = T / 400
        t_db = an.deadbeat_time(an.IssParams(T, delta), t_v)
        tr = integrate(es.lemma1_problem(sched, hist, v), t_db + 2 * T, h)
        t_all = tr.times
        hist_vals = np.abs(tr.states[: tr.n_history + 1, 0])
        phi = float(hist_vals.max())
        t, X = tr.solution()
        x = X[:, 0]
        v_sup = an.running_sup(v(t))
        bound = an.iss_bound(an.IssParams(T, delta), t, phi, v_sup)
        slack = 1e-9 * max(1.0, phi)
        worst_x = max(worst_x, float(np.max(np.abs(x) - bound - slack)))
        lag = tr.states[tr.n_history - 400: tr.states.shape[0] - 400, 0]
        u = -kt_kernel(t, T, delta) * lag
        ubound = an.iss_control_bound(an.IssParams(T, delta), t, phi, v_sup)
        worst_u = max(worst_u, float(np.max(np.abs(u) - ubound - slack)))
        worst_db = max(worst_db, float(np.max(np.abs(x[t >= t_db - 1e-9]))))
        del t_all
    ok = worst_x <= 0 and worst_u <= 0 and worst_db <= 1e-9
    return CheckResult("iss_domination", ok,
                       f"{runs} runs: max(|x| - bound) = {worst_x:.3g}, max(|u| - bound) = {worst_u:.3g}, "
                       f"max |x| after dead-beat time = {worst_db:.3g}")


def _random_timing(rng, step_div=800):
    dz, dx = rng.uniform(-0.99, 1.0), rng.uniform(-0.99, 1.0)
    T = rng.uniform(0.5, 3.0)
    h = T / step_div
    D = int(rng.integers(0, step_div)) * h
    c = es.timing._ceil_term(dz, dx)
    T_star = T * (4 - dz + 2 * c) - 2 * D
    tim = es.select_T(D, dz, dx, T_star)
    return tim, h


def _averaged_random_runs(runs, k2t=None, seed=4):
    kernel = None if k2t is None else an.make_averaged_scalar_kernel(k2t=k2t)
    rng = _rng(seed)
    for _ in range(runs):
        tim, h = _random_timing(rng)
        H_star = -rng.uniform(0.3, 3.0)
        H0 = H_star * rng.uniform(0.5, 1.5)
        init = an.AveragedScalarState(rng.uniform(-5, 5), rng.uniform(-1, 1), 1 / H0 - 1 / H_star, H0 - H_star)
        prob = an.averaged_scalar_problem(H_star, tim.D, GainSchedule(tim.T, tim.delta_zeta, tim.delta_xi),
                                          init, kernel=kernel)
        st = tim.settling
        tr = integrate(prob, st.tau1 + 2 * tim.T, h)
        yield tim, st, H_star, tr


def check_averaged_hessian_deadbeat(k2t=None, runs: int = 8) -> CheckResult:
    worst_after = 0.0
    least_before = math.inf
    for tim, st, _, tr in _averaged_random_runs(runs, k2t):
        t, X = tr.solution()
        H = np.abs(X[:, 3])
        worst_after = max(worst_after, float(H[t >= st.t_hessian - 1e-9].max()))
        least_before = min(least_before, float(abs(tr.lookup(st.t_hessian - tim.T)[3])))
    ok = worst_after <= 1e-8 and least_before > 0
    return CheckResult("averaged_hessian_deadbeat", ok,
                       f"max |H~| after 4T - 2 delta_xi T: {worst_after:.3g}; min |H~| one T earlier: {least_before:.3g}")


def check_averaged_theta_deadbeat(k2t=None, runs: int = 8) -> CheckResult:
    worst_after = 0.0
    least_before = math.inf
    for tim, st, _, tr in _averaged_random_runs(runs, k2t):
        t, X = tr.solution()
        n = np.hypot(X[:, 0], X[:, 1])
        worst_after = max(worst_after, float(n[t >= st.tau1 - 1e-9].max()))
        least_before = min(least_before, float(np.hypot(*tr.lookup(st.tau1 - tim.T)[:2])))
    ok = worst_after <= 1e-6
    return CheckResult("averaged_theta_deadbeat", ok,
                       f"max |(theta~, z)| after T* + 2D: {worst_after:.3g}; min one T earlier: {least_before:.3g}")


def check_riccati_relation(k2t=None, runs: int = 8) -> CheckResult:
    worst = 0.0
    for _, _, H_star, tr in _averaged_random_runs(runs, k2t):
        _, X = tr.solution()
        worst = max(worst, float(an.riccati_relation_residual(X[:, 2], X[:, 3], H_star).max()))
    return CheckResult("riccati_relation", worst <= 1e-6, f"max residual = {worst:.3g}")


def check_target_transform(runs: int = 8) -> CheckResult:
    worst1 = worst2 = 0.0
    for tim, _, H_star, tr in _averaged_random_runs(runs):
        _, r1, r2 = an.target_residuals(tr, tim.schedule, H_star, tim.D)
        worst1 = max(worst1, float(np.max(np.abs(r1))))
        worst2 = max(worst2, float(np.nanmax(np.abs(r2))))
    ok = worst1 <= 1e-6 and worst2 <= 1e-6
    return CheckResult("target_transform", ok, f"sup residuals: x1 {worst1:.3g}, x2 {worst2:.3g}")


# -- averaging of the full right-hand side --------------------------------------

def check_full_vs_averaged_rhs(states: int = 50) -> CheckResult:
    rng = _rng(5)
    plant = QuadraticMapScalar(Y_STAR, THETA_STAR, H_STAR, D_REF)
    dither = DitherSpecScalar(A_REF, OMEGA_REF, D_REF)
    sched = GainSchedule(6.25)
    worst = 0.0
    for _ in range(states):
        t = rng.uniform(0, 10 * sched.T)
        x = np.array([rng.uniform(-5, 5), rng.uniform(-1, 1), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)])
        lag = np.column_stack([rng.uniform(-5, 5, 3), rng.uniform(-1, 1, 3),
                               rng.uniform(-0.5, 0.5, 3), rng.uniform(-0.5, 0.5, 3)])
        full = an.period_average_scalar(t, x, lag, plant, dither, sched)
        avg = an.averaged_rhs(t, x, lag, H_STAR, D_REF, sched)
        worst = max(worst, float(np.max(np.abs(full - avg))))
    # vector map with frequency ratios (50, 70)
    mplant = QuadraticMapMulti(1.0, np.array([0.0, 1.0]), np.array([[-2.0, -2.0], [-2.0, -4.0]]))
    mdither = DitherSpecMulti((0.5, 0.5), 20.0, (50, 70))
    msched = GainSchedule(3.75)
    worst_m = 0.0
    for _ in range(10):
        t = rng.uniform(0, 10 * msched.T)
        x = rng.uniform(-1, 1, 12) * 0.5
        lag = rng.uniform(-1, 1, (2, 12)) * 0.5
        full = an.period_average_multi(t, x, lag, mplant, mdither, msched)
        avg = an.averaged_multi_rhs(t, x, lag, mplant.H_star, msched)
        worst_m = max(worst_m, float(np.max(np.abs(full - avg))))
    ok = worst <= 1e-6 and worst_m <= 1e-6
    return CheckResult("full_vs_averaged_rhs", ok,
                       f"max mismatch: scalar ({states} states) {worst:.3g}, vector (10 states) {worst_m:.3g}")


# -- integrator ----------------------------------------------------------------

def _exponential_problem():
    def rhs(t, x, lag, p):
        return -x
    return RfdeProblem(rhs, 1, (), np.array([1.0]))


def check_integrator_order() -> CheckResult:
    errs = []
    for h in (0.1, 0.05):
        tr = integrate(_exponential_problem(), 2.0, h)
        errs.append(abs(tr.states[-1, 0] - math.exp(-2.0)))
    ratio = errs[0] / errs[1]
    return CheckResult("integrator_order", 14.0 <= ratio <= 18.0, f"error ratio on halving = {ratio:.3f}")


def method_of_steps_exact(t: float) -> float:
    """``x' = -x(t-1)``, ``x = 1`` on [-1, 0], solved interval by interval."""
    return sum((-1) ** j * (t - j + 1) ** j / math.factorial(j) for j in range(int(math.floor(t)) + 2))


def check_method_of_steps() -> CheckResult:
    def rhs(t, x, lag, p):
        return -lag[0]
    tr = integrate(RfdeProblem(rhs, 1, (1.0,), np.array([1.0])), 5.0, 0.01)
    t, X = tr.solution()
    err = max(abs(X[k, 0] - method_of_steps_exact(t[k])) for k in range(0, t.size, 10))
    return CheckResult("method_of_steps", err <= 1e-8, f"max error vs piecewise polynomial = {err:.3g}")


CHECKS: dict[str, Callable[[], CheckResult]] = {
    "gain_orthogonality": check_gain_orthogonality,
    "pulse_mass": check_pulse_mass,
    "lt_is_derivative_of_kt": check_lt_derivative,
    "gain_periodicity": check_gain_periodicity,
    "phase_recovery": check_phase_recovery,
    "oscillator_closed_form": check_oscillator,
    "averaging_identities": check_averaging_identities,
    "frequency_rules": check_frequency_rules,
    "timing_identities": check_timing_identities,
    "lemma1_deadbeat": check_lemma1_deadbeat,
    "iss_domination": check_iss_domination,
    "averaged_hessian_deadbeat": check_averaged_hessian_deadbeat,
    "averaged_theta_deadbeat": check_averaged_theta_deadbeat,
    "riccati_relation": check_riccati_relation,
    "target_transform": check_target_transform,
    "full_vs_averaged_rhs": check_full_vs_averaged_rhs,
    "integrator_order": check_integrator_order,
    "method_of_steps": check_method_of_steps,
}


def run_checks(pattern: str | None = None) -> list[CheckResult]:
    results = []
    for name, fn in CHECKS.items():
        if pattern and pattern not in name:
            continue
        try:
            results.append(fn())
        except Exception as e:  # a crashing check is a failing check
            results.append(CheckResult(name, False, f"raised {type(e).__name__}: {e}"))
    return results
