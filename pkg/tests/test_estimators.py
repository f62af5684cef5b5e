import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import k2t_ref, kt_ref, lt_ref
from ptes import estimators as es
from ptes.dde import integrate
from ptes.plant import QuadraticMapMulti, QuadraticMapScalar, map_output
from ptes.signals import DitherSpecMulti, DitherSpecScalar, GainSchedule

PLANT = QuadraticMapScalar(5.0, 2.0, -0.8, 5.0)
DITHER = DitherSpecScalar(0.5, 1000.0, 5.0)
SCHED = GainSchedule(6.25)

vals = st.floats(-3, 3)


def k4t_ref(t, T, d):
    s = math.sin(math.pi * (t + 4 * d * T) / (4 * T))
    return 0.5 * s * s / T if s < 0 else 0.0


# -- plant --------------------------------------------------------------------

def test_scalar_map_values():
    assert PLANT(2.0) == 5.0
    assert map_output(PLANT, 3.0) == pytest.approx(5.0 - 0.4)
    with pytest.raises(ValueError):
        QuadraticMapScalar(0, 0, 0.0)
    with pytest.raises(ValueError):
        QuadraticMapScalar(0, 0, 1.0, -1.0)


def test_vector_map_values_and_validation():
    m = QuadraticMapMulti(1.0, [0.0, 1.0], [[-2.0, -2.0], [-2.0, -4.0]])
    assert m.n == 2 and m.D == 0.0
    assert m([1.0, 1.0]) == pytest.approx(1.0 - 1.0)
    assert m([1.0, 2.0]) == pytest.approx(1.0 + 0.5 * (-2 - 4 - 4))
    with pytest.raises(ValueError, match="symmetric"):
        QuadraticMapMulti(0.0, [0, 0], [[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(ValueError, match="invertible"):
        QuadraticMapMulti(0.0, [0, 0], [[1.0, 1.0], [1.0, 1.0]])
    with pytest.raises(ValueError, match="shape"):
        QuadraticMapMulti(0.0, [0, 0, 0], [[1.0, 0.0], [0.0, 1.0]])


# -- timing ---------------------------------------------------------------------

@pytest.mark.parametrize("D, Tstar, T", [(5.0, 40.0, 6.25), (0.0, 30.0, 3.75), (0.0, 4.0, 0.5)])
def test_select_T_values(D, Tstar, T):
    assert es.select_T(D, 0.0, 0.0, Tstar).T == T


def test_settling_times_reference_case():
    st_ = es.select_T(5.0, 0.0, 0.0, 40.0).settling
    assert (st_.t_hessian, st_.t_theta, st_.tau1, st_.tau2) == (25.0, 50.0, 50.0, 37.5)


def test_admissibility_bound():
    assert es.admissible_T_star_bound(5.0) == 30.0
    with pytest.raises(ValueError, match="not admissible"):
        es.select_T(5.0, 0.0, 0.0, 30.0)
    es.select_T(5.0, 0.0, 0.0, 30.0 + 1e-9)
    with pytest.raises(ValueError):
        es.admissible_T_star_bound(-1.0)
    with pytest.raises(ValueError):
        es.select_T(1.0, 0.0, 0.0, 0.0)


@settings(max_examples=300)
@given(st.floats(0, 10), st.floats(-0.999, 1.0), st.floats(-0.999, 1.0), st.floats(0.01, 100))
def test_timing_identities(D, dz, dx, margin):
    bound = es.admissible_T_star_bound(D, dz, dx)
    tim = es.select_T(D, dz, dx, bound + margin)
    s = tim.settling
    c = math.ceil((4 - (2 * dx - dz)) / 2 - 1e-12)
    assert tim.ceil_term == c
    assert tim.T > D
    assert s.tau1 == pytest.approx(tim.T_star + 2 * D, rel=1e-12)
    assert s.tau2 == pytest.approx(s.tau1 - 2 * tim.T, rel=1e-12)
    assert s.t_hessian == pytest.approx(4 * tim.T - 2 * dx * tim.T, rel=1e-12)
    # the Hessian settles no later than the parameter
    assert s.t_hessian <= s.tau1 + 1e-9


# -- scalar KHV ----------------------------------------------------------------

def khv_scalar_ref(t, x, lag):
    th, z, G, H = x
    s = math.sin(1000.0 * t)
    e = lag[0][0] + 0.5 * math.sin(1000.0 * t) - 2.0
    y = 5.0 - 0.4 * e * e
    M, N = 4.0 * s, 64.0 * (s * s - 0.5)
    T = 6.25
    return [z,
            -2 * kt_ref(t, T, 0) * lag[1][1] + lt_ref(t, T, 0) * (lag[0][0] - lag[1][0] - G * M * y),
            k2t_ref(t, T, 0) * G * G * (lag[2][3] - N * y),
            -k2t_ref(t, T, 0) * (lag[2][3] - N * y)]


@settings(max_examples=200)
@given(st.floats(0, 60), st.lists(vals, min_size=16, max_size=16))
def test_khv_scalar_rhs_matches_reference(t, v):
    x = np.array(v[:4])
    x[2] = x[2] or 1.0
    lag = np.array(v[4:]).reshape(3, 4)
    got = es.khv_scalar_rhs(t, x, lag, PLANT, DITHER, SCHED)
    np.testing.assert_allclose(got, khv_scalar_ref(t, x, lag), rtol=1e-9, atol=1e-9)


def test_khv_scalar_riccati_consistency():
    # Gamma = 1 / H_hat is invariant under Gamma' = -Gamma^2 H_hat'
    # the discrete drift is truncation error and shrinks at fourth order
    prob = es.khv_scalar_problem(PLANT, DITHER, SCHED, es.KhvScalarState(-5.0, 0.1, -0.9))
    drift = []
    for h in (6.25e-5, 3.125e-5):
        _, X = integrate(prob, 25.0, h, DITHER.omega).solution()
        drift.append(np.max(np.abs(X[:, 2] * X[:, 3] - 1.0)))
    assert drift[0] < 1e-6
    assert drift[0] / drift[1] > 12


def test_khv_scalar_outputs_shapes():
    prob = es.khv_scalar_problem(PLANT, DITHER, SCHED, es.KhvScalarState(-5.0, 0.1, -0.9))
    tr = integrate(prob, 1.0, 6.25e-5, DITHER.omega)
    out = es.khv_scalar_outputs(tr, PLANT, DITHER, SCHED)
    t, X = tr.solution()
    assert set(out) == {"y", "theta", "K_T", "L_T", "K_2T"}
    # constant history: theta_hat(t - D) = -5 on [0, D]
    np.testing.assert_allclose(out["y"], 5.0 - 0.4 * (-5.0 + 0.5 * np.sin(1000 * t) - 2.0) ** 2, atol=1e-12)


def test_khv_scalar_problem_validation():
    with pytest.raises(ValueError, match="T > D"):
        es.khv_scalar_problem(PLANT, DITHER, GainSchedule(5.0), es.KhvScalarState(0, 0, -1))
    with pytest.raises(ValueError, match="advance"):
        es.khv_scalar_problem(PLANT, DitherSpecScalar(0.5, 1000.0, 0.0), SCHED, es.KhvScalarState(0, 0, -1))
    with pytest.raises(ValueError):
        es.KhvScalarState(0.0, 0.0, 0.0)
    assert es.KhvScalarState(0.0, 0.0, -0.5).H_hat == -2.0


# -- vector KHV ----------------------------------------------------------------

MPLANT = QuadraticMapMulti(1.0, np.array([0.0, 1.0]), np.array([[-2.0, -2.0], [-2.0, -4.0]]))
MDITHER = DitherSpecMulti((0.5, 0.5), 20.0, (50, 70))
MSCHED = GainSchedule(3.75)


def khv_multi_ref(t, x, lag):
    n = 2
    th, z = x[:2], x[2:4]
    G = x[4:8].reshape(2, 2)
    a = np.array([0.5, 0.5])
    w = np.array([1000.0, 1400.0])
    s = np.sin(w * t)
    S, M = a * s, 2 / a * s
    N = np.array([[16 / a[i] ** 2 * (s[i] ** 2 - 0.5) if i == j else 4 / (a[i] * a[j]) * s[i] * s[j]
                   for j in range(n)] for i in range(n)])
    e = th + S - MPLANT.theta_star
    y = 1.0 + 0.5 * e @ MPLANT.H_star @ e
    T = 3.75
    KT, LT, K2 = kt_ref(t, T, 0), lt_ref(t, T, 0), k2t_ref(t, T, 0)
    Hl = lag[1][8:].reshape(2, 2)
    return np.concatenate([z, -2 * KT * lag[0][2:4] + LT * (th - lag[0][:2] - y * G @ M),
                           (K2 * G @ (Hl - N * y) @ G).ravel(), (-K2 * (Hl - N * y)).ravel()])


@settings(max_examples=100)
@given(st.floats(0, 40), st.lists(vals, min_size=36, max_size=36))
def test_khv_multi_rhs_matches_reference(t, v):
    x = np.array(v[:12])
    lag = np.array(v[12:]).reshape(2, 12)
    np.testing.assert_allclose(es.khv_multi_rhs(t, x, lag, MPLANT, MDITHER, MSCHED), khv_multi_ref(t, x, lag),
                               rtol=1e-9, atol=1e-8)


def test_multi_state_and_layout():
    s = es.KhvMultiState([0, 0], [0, 0], -np.eye(2))
    np.testing.assert_allclose(s.H_hat, -np.eye(2))
    lay = es.multi_layout(2)
    assert lay["H_hat"] == slice(8, 12)
    with pytest.raises(ValueError):
        es.khv_multi_problem(MPLANT, MDITHER, MSCHED, es.KhvMultiState([0], [0], -np.eye(1)))


# -- delay-free alternative ------------------------------------------------------

def alt_ref(t, x, lag, T=3.0):
    th_lag = lag[0][0]
    s = math.sin(1000.0 * t)
    e = th_lag + 0.5 * s - 2.0
    y_lag = 5.0 - 0.4 * e * e
    M, N = 4.0 * s, 64.0 * (s * s - 0.5)
    G = x[1]
    innov = lag[1][2] - N * y_lag
    K4 = k4t_ref(t, T, 0.0)
    return [-kt_ref(t, T, 0.0) * G * M * y_lag, K4 * G * G * innov, -K4 * innov]


@settings(max_examples=200)
@given(st.floats(0, 60), st.lists(vals, min_size=9, max_size=9))
def test_alt_rhs_matches_reference(t, v):
    x, lag = np.array(v[:3]), np.array(v[3:]).reshape(2, 3)
    plant = QuadraticMapScalar(5.0, 2.0, -0.8, 0.0)
    got = es.delay_free_alt_rhs(t, x, lag, plant, DitherSpecScalar(0.5, 1000.0, 3.0), GainSchedule(3.0))
    np.testing.assert_allclose(got, alt_ref(t, x, lag), rtol=1e-9, atol=1e-9)


def test_alt_map_delay_variant_is_identical():
    dither = DitherSpecScalar(0.5, 1000.0, 3.0)
    sched = GainSchedule(3.0)
    init = es.AltState(-1.0, -0.9)
    a = es.delay_free_alt_problem(QuadraticMapScalar(5.0, 2.0, -0.8, 0.0), dither, sched, init)
    b = es.delay_free_alt_problem(QuadraticMapScalar(5.0, 2.0, -0.8, 3.0), dither, sched, init,
                                  use_map_delay=True)
    ta, tb = integrate(a, 12.0, 1e-4, 1000.0), integrate(b, 12.0, 1e-4, 1000.0)
    np.testing.assert_array_equal(ta.states, tb.states)


def test_alt_problem_validation():
    dither = DitherSpecScalar(0.5, 1000.0, 3.0)
    init = es.AltState(-1.0, -0.9)
    with pytest.raises(ValueError, match="D = 0"):
        es.delay_free_alt_problem(QuadraticMapScalar(5, 2, -0.8, 1.0), dither, GainSchedule(3.0), init)
    with pytest.raises(ValueError, match="T = D"):
        es.delay_free_alt_problem(QuadraticMapScalar(5, 2, -0.8, 1.0), dither, GainSchedule(3.0), init, True)
    with pytest.raises(ValueError, match="advanced by T"):
        es.delay_free_alt_problem(QuadraticMapScalar(5, 2, -0.8, 0.0), DitherSpecScalar(0.5, 1000.0),
                                  GainSchedule(3.0), init)


# -- baseline -------------------------------------------------------------------

GAINS = es.BaselineGains(0.1, 0.05, 0.02)


def baseline_ref(t, x, lag):
    s = math.sin(1000.0 * t)
    e = lag[0][0] + 0.5 * s - 2.0
    y = 5.0 - 0.4 * e * e
    M, N = 4.0 * s, 64.0 * (s * s - 0.5)
    th, z, G = x
    return [z, -0.1 * z - 0.005 * G * M * y - 0.005 * th + 0.005 * lag[0][0], 0.02 * G - 0.02 * N * y * G * G]


@settings(max_examples=200)
@given(st.floats(0, 60), st.lists(vals, min_size=6, max_size=6))
def test_baseline_rhs_matches_reference(t, v):
    x, lag = np.array(v[:3]), np.array(v[3:]).reshape(1, 3)
    np.testing.assert_allclose(es.baseline_rhs(t, x, lag, PLANT, DITHER, GAINS), baseline_ref(t, x, lag),
                               rtol=1e-9, atol=1e-9)


def test_baseline_pointwise_matches_distributed_form():
    dither = DitherSpecScalar(0.5, 50.0, 5.0)
    hist = lambda s: np.array([-5.0 + 0.1 * s, 0.1, -0.9])
    t, Xd = es.baseline_distributed(PLANT, dither, GAINS, hist, 40.0, 0.0025)
    tr = integrate(es.baseline_problem(PLANT, dither, GAINS, es.BaselineState(-5.0, 0.1, -0.9), history=hist),
                   40.0, 0.0025)
    _, X = tr.solution()
    assert np.max(np.abs(X - Xd)) < 1e-5


def test_baseline_validation():
    with pytest.raises(ValueError):
        es.BaselineGains(0.05, 0.1, 0.02)
    with pytest.raises(ValueError):
        es.BaselineGains(0.1, 0.05, 0.0)
    with pytest.raises(ValueError, match="D > 0"):
        es.baseline_distributed(QuadraticMapScalar(5, 2, -0.8), DitherSpecScalar(0.5, 50.0), GAINS,
                                lambda s: np.zeros(3), 1.0, 0.01)


# -- dead-beat demonstrator -------------------------------------------------------

def test_fig1_closed_form():
    tr = integrate(es.lemma1_problem(GainSchedule(1.0), -1.0), 3.0, 1e-3)
    t, X = tr.solution()
    w = (t >= 1) & (t <= 2)
    exact = -1 + (t[w] - 1) - np.sin(2 * np.pi * t[w]) / (2 * np.pi)
    assert np.max(np.abs(X[w, 0] - exact)) < 1e-8
    assert np.all(X[t <= 1, 0] == -1.0)


def test_lemma1_jitted_and_callable_agree():
    sched = GainSchedule(1.0, 0.3)
    v = es.PiecewiseConstant((0.0, 0.7, 1.5), (1.0, -0.5, 0.0))
    a = integrate(es.lemma1_problem(sched, 0.4, v), 6.0, 1e-3).states
    b = integrate(es.lemma1_problem_callable(sched, 0.4, v), 6.0, 1e-3).states
    np.testing.assert_allclose(a, b, atol=1e-14)


def test_lemma1_rhs_formula():
    sched = GainSchedule(1.0)
    v = es.PiecewiseConstant((0.0, 1.0), (1.0, 0.0))
    assert es.lemma1_rhs(1.5, 0.0, -1.0, sched, v) == pytest.approx(2.0)
    assert es.lemma1_rhs(0.5, 0.0, -1.0, sched, v) == pytest.approx(1.0)


def test_lemma1_nonconstant_history_with_positive_phase_slips_one_period():
    # with delta > 0 the first active window reads history, so only constant histories settle at 2T - delta T
    sched = GainSchedule(1.0, 0.5)
    const = integrate(es.lemma1_problem(sched, -1.0), 5.0, 1e-3)
    wavy = integrate(es.lemma1_problem(sched, lambda s: np.array([-1.0 + 0.5 * math.sin(3 * s)])), 5.0, 1e-3)
    t, Xc = const.solution()
    _, Xw = wavy.solution()
    after = t >= 1.5 - 1e-12
    assert np.max(np.abs(Xc[after, 0])) < 1e-12
    assert np.max(np.abs(Xw[after & (t < 3.5), 0])) > 1e-3
    assert np.max(np.abs(Xw[t >= 3.5 - 1e-12, 0])) < 1e-12


def test_piecewise_constant():
    v = es.PiecewiseConstant((0.0, 1.0, 2.0), (3.0, -4.0, 0.0))
    np.testing.assert_array_equal(v(np.array([-1.0, 0.0, 0.5, 1.0, 1.9, 2.0, 9.0])),
                                  [0.0, 3.0, 3.0, -4.0, -4.0, 0.0, 0.0])
    assert v.sup == 4.0
    assert es.PiecewiseConstant.zero()(5.0) == 0.0
    with pytest.raises(ValueError):
        es.PiecewiseConstant((1.0, 0.0), (1.0, 2.0))
