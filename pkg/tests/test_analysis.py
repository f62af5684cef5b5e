import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numba import vectorize
from scipy.integrate import quad

from oracles import averaged_scalar_reference
from ptes import analysis as an
from ptes import checks
from ptes.analysis.bounds import E6
from ptes.dde import integrate
from ptes.plant import QuadraticMapMulti, QuadraticMapScalar
from ptes.signals import DitherSpecMulti, DitherSpecScalar, GainSchedule, k2t_kernel

H_STAR = -0.8


def _fig7_state():
    return an.AveragedScalarState.from_estimates(-5.0, 0.1, -0.9, 1 / -0.9, 2.0, H_STAR)


# -- averaged dynamics --------------------------------------------------------------

def test_averaged_scalar_matches_independent_solver():
    x0 = _fig7_state().as_array()
    ref = averaged_scalar_reference(H_STAR, 5.0, 6.25, 0.0, 0.0, x0, 60.0)
    tr = integrate(an.averaged_scalar_problem(H_STAR, 5.0, GainSchedule(6.25), x0), 60.0, 1e-3)
    t, X = tr.solution()
    idx = np.arange(0, t.size, 250)
    assert np.max(np.abs(ref(t[idx]) - X[idx])) < 1e-7


def test_averaged_scalar_with_phases_matches_independent_solver():
    x0 = np.array([1.5, -0.2, 0.3, -0.2])
    ref = averaged_scalar_reference(-1.3, 1.0, 2.0, 0.4, -0.3, x0, 20.0)
    tr = integrate(an.averaged_scalar_problem(-1.3, 1.0, GainSchedule(2.0, 0.4, -0.3), x0), 20.0, 2e-3)
    t, X = tr.solution()
    idx = np.arange(0, t.size, 100)
    assert np.max(np.abs(ref(t[idx]) - X[idx])) < 1e-6


def test_averaged_state_from_estimates():
    s = an.AveragedScalarState.from_estimates(-5.0, 0.1, -0.9, -1 / 0.9, 2.0, -0.8)
    assert s.theta == -7.0 and s.z == 0.1
    assert s.Gamma == pytest.approx(-0.9 + 1.25)
    assert s.H == pytest.approx(-1 / 0.9 + 0.8)


def test_averaged_multi_settles_on_schedule():
    H = np.array([[-2.0, -2.0], [-2.0, -4.0]])
    x0 = an.averaged_multi_initial([-1.0, 2.0], [0.0, 0.0], -np.diag([0.01, 0.005]), -np.diag([100.0, 200.0]),
                                   np.array([0.0, 1.0]), H)
    tr = integrate(an.averaged_multi_problem(H, GainSchedule(3.75), x0), 35.0, 1e-3)
    t, X = tr.solution()
    G_err = np.linalg.norm(X[:, 4:8], axis=1)
    th_err = np.linalg.norm(X[:, 0:4], axis=1)
    assert G_err[t >= 15 - 1e-9].max() < 1e-8
    assert th_err[t >= 30 - 1e-9].max() < 1e-6
    assert G_err[np.searchsorted(t, 14.0)] > 1e-3
    assert th_err[np.searchsorted(t, 29.0)] > 1e-3


def test_averaged_alt_settles_at_ten_T():
    T = 3.0
    x0 = [-3.0, -0.9 + 1.25, 1 / -0.9 + 0.8]
    tr = integrate(an.averaged_alt_problem(H_STAR, GainSchedule(T), x0), 40.0, 1e-3)
    t, X = tr.solution()
    assert np.abs(X[t >= 8 * T - 1e-9, 2]).max() < 1e-10
    assert np.abs(X[t >= 10 * T - 1e-9, 0]).max() < 1e-10
    assert abs(tr.lookup(9 * T)[0]) > 1e-5


# -- averaging identities -----------------------------------------------------------

def _residuals_by_quad(chi, y_star, H, a, w, D):
    P = 2 * math.pi / w
    y = lambda t: y_star + 0.5 * H * (a * math.sin(w * t) + chi) ** 2
    g = quad(lambda t: 2 / a * math.sin(w * t) * y(t), 0, P, limit=200, epsabs=1e-13)[0] / P
    h = quad(lambda t: 16 / a ** 2 * (math.sin(w * t) ** 2 - 0.5) * y(t), 0, P, limit=200, epsabs=1e-13)[0] / P
    return abs(g - H * chi), abs(h - H)


@pytest.mark.parametrize("chi", [-2.0, -0.5, 0.0, 1.0, 3.0])
def test_averaging_identities_two_routes(chi):
    r = an.averaging_residuals(chi, 5.0, H_STAR, 0.5, 1000.0, 5.0)
    g, h = _residuals_by_quad(chi, 5.0, H_STAR, 0.5, 1000.0, 5.0)
    assert r.gradient < 1e-6 and r.hessian < 1e-6
    assert g < 1e-6 and h < 1e-6


def test_averaging_residuals_validation():
    with pytest.raises(ValueError):
        an.averaging_residuals(0.0, 1.0, 1.0, 0.5, 1.0, nodes=1)


def test_period_average_matches_averaged_rhs():
    rng = np.random.default_rng(11)
    plant = QuadraticMapScalar(5.0, 2.0, H_STAR, 5.0)
    dither = DitherSpecScalar(0.5, 1000.0, 5.0)
    sched = GainSchedule(6.25, 0.2, -0.4)
    for _ in range(5):
        t = rng.uniform(0, 60)
        x = rng.uniform(-1, 1, 4)
        lag = rng.uniform(-1, 1, (3, 4))
        full = an.period_average_scalar(t, x, lag, plant, dither, sched)
        np.testing.assert_allclose(full, an.averaged_rhs(t, x, lag, H_STAR, 5.0, sched), atol=1e-9)


def test_period_average_multi_matches_averaged_rhs():
    rng = np.random.default_rng(12)
    plant = QuadraticMapMulti(1.0, np.array([0.0, 1.0]), np.array([[-2.0, -2.0], [-2.0, -4.0]]))
    dither = DitherSpecMulti((0.5, 0.5), 20.0, (50, 70))
    sched = GainSchedule(3.75)
    for _ in range(3):
        t = rng.uniform(0, 30)
        x = rng.uniform(-0.5, 0.5, 12)
        lag = rng.uniform(-0.5, 0.5, (2, 12))
        full = an.period_average_multi(t, x, lag, plant, dither, sched)
        np.testing.assert_allclose(full, an.averaged_multi_rhs(t, x, lag, plant.H_star, sched), atol=1e-9)


# -- target system -------------------------------------------------------------------

def test_target_transform_residuals_vanish():
    x0 = _fig7_state().as_array()
    sched = GainSchedule(6.25)
    tr = integrate(an.averaged_scalar_problem(H_STAR, 5.0, sched, x0), 60.0, 1e-3)
    t, x1, x2 = an.target_transform(tr, sched)
    _, r1, r2 = an.target_residuals(tr, sched, H_STAR, 5.0)
    assert np.max(np.abs(r1)) < 1e-9
    assert np.isnan(r2[t < 6.25 - 1e-9]).all()
    assert np.nanmax(np.abs(r2)) < 1e-9
    # x1 is the parameter error, both coordinates are zero after T* + 2D
    np.testing.assert_array_equal(x1, tr.solution()[1][:, 0])
    assert np.max(np.abs(x2[t >= 50])) < 1e-9


# -- bounds ---------------------------------------------------------------------------

def test_iss_bound_values():
    p = an.IssParams(1.0, 0.0)
    np.testing.assert_allclose(an.iss_bound(p, [0.0, 1.99, 2.0], 2.0, [0.0, 0.0, 0.5]),
                               [2 * E6, 2 * E6, 3 * E6])
    np.testing.assert_allclose(an.iss_control_bound(p, [1.0, 3.0], 1.0, [0.0, 1.0]), [2 * E6, 12 * E6])


@given(st.floats(0.1, 5), st.floats(-0.999, 1.0), st.floats(0, 20))
def test_deadbeat_time_properties(T, d, tv):
    t = an.deadbeat_time(an.IssParams(T, d), tv)
    # lands at the end of an active window, after the input vanished
    assert t >= tv - 1e-9
    k = (t + d * T) / (2 * T)
    assert k == pytest.approx(round(k), abs=1e-9)
    # and within two periods of it
    assert t < tv + 4 * T + 1e-9


def test_deadbeat_time_reference_cases():
    assert an.deadbeat_time(an.IssParams(1.0, 0.0), 0.0) == 2.0
    assert an.deadbeat_time(an.IssParams(1.0, 0.0), 1.0) == 4.0
    # with delta > 0 the first window reads history, so an arbitrary history needs one more period
    assert an.deadbeat_time(an.IssParams(1.0, 0.5), 0.0) == 3.5
    assert an.deadbeat_time(an.IssParams(1.0, -0.5), 0.0) == 2.5


def test_running_sup():
    np.testing.assert_array_equal(an.running_sup([1, -3, 2, -1, 4]), [1, 3, 3, 3, 4])


def test_claim1_bound_check_trailing_window():
    t = np.arange(-10, 31) * 0.5
    x = np.zeros_like(t)
    x[t == 3.0] = -7.0
    x[t == 14.0] = 9.0
    assert an.claim1_bound_check(t, x, 2.0, 10.0) == 7.0
    # the spike at 14 enters once the window [t - 2, t] reaches it
    assert an.claim1_bound_check(t, x, 2.0, 14.0) == 9.0
    assert an.claim1_bound_check(t, x, 2.0, 13.5) == 7.0
    with pytest.raises(ValueError):
        an.claim1_bound_check(t, x, 6.0, 10.0)


# -- metrics --------------------------------------------------------------------------

def test_closeness_metric_resamples():
    ta = np.arange(0, 101) * 0.1
    tb = np.arange(0, 1001) * 0.01
    a = np.sin(ta)[:, None]
    b = np.sin(tb)[:, None] + 1e-3 * (tb > 5)[:, None]
    assert an.closeness_metric(ta, a, tb, b, 10.0) == pytest.approx(1e-3)
    assert an.closeness_metric(tb, b, ta, a, 4.0) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValueError, match="cover"):
        an.closeness_metric(ta, a, tb, b, 11.0)
    with pytest.raises(ValueError, match="grid"):
        an.closeness_metric(np.arange(0, 361) * 0.025, np.zeros((361, 1)), tb, b, 9.0)


def test_riccati_relation_residual():
    assert an.riccati_relation_residual(0.0, 0.0, -0.8) == 0.0
    assert an.riccati_relation_residual(0.1, 0.0, -0.8) == pytest.approx(0.1)
    with pytest.raises(ZeroDivisionError):
        an.riccati_relation_residual(0.0, 0.8, -0.8)


def test_settling_time():
    t = np.arange(6.0)
    assert an.settling_time(t, [5, 4, 0, 2, 0, 0], 1.0) == 4.0
    assert an.settling_time(t, [0, 0, 0, 0, 0, 0], 1.0) == 0.0
    assert an.settling_time(t, [0, 0, 0, 0, 0, 3], 1.0) is None


@pytest.mark.parametrize("ts, label", [(22.499, "6T"), (15.0, "4T"), (18.75, "neither"), (None, "not settled")])
def test_classify_settling(ts, label):
    assert an.classify_settling(ts, 3.75) == label


# -- checks and their sensitivity ----------------------------------------------------------

@vectorize(["float64(float64, float64, float64)"])
def _k2t_perturbed(t, T, delta):
    return 1.01 * k2t_kernel(t, T, delta)


def test_deadbeat_checks_pass_with_exact_gain():
    assert checks.check_averaged_hessian_deadbeat(runs=3).passed
    assert checks.check_averaged_theta_deadbeat(runs=3).passed


def test_deadbeat_checks_catch_one_percent_gain_error():
    assert not checks.check_averaged_hessian_deadbeat(k2t=_k2t_perturbed, runs=3).passed
    assert not checks.check_averaged_theta_deadbeat(k2t=_k2t_perturbed, runs=3).passed


@pytest.mark.parametrize("name", ["gain_orthogonality", "pulse_mass", "lt_is_derivative_of_kt", "gain_periodicity",
                                  "phase_recovery", "oscillator_closed_form", "averaging_identities",
                                  "frequency_rules", "timing_identities", "lemma1_deadbeat", "riccati_relation",
                                  "target_transform", "integrator_order", "method_of_steps"])
def test_named_check_passes(name):
    r = checks.CHECKS[name]()
    assert r.passed, r.line()


def test_run_checks_filters_and_catches():
    assert [r.name for r in checks.run_checks("pulse")] == ["pulse_mass"]
    assert checks.run_checks("no-such-check") == []
