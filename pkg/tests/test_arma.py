import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rtforecast import synth
from rtforecast.arma import (
    ArFit,
    ArimaMethod,
    ArimaSpec,
    ArMethod,
    difference,
    fit_ar_ols,
    fit_arima,
    forecast_ar,
    forecast_arima,
    undifference,
)
from rtforecast.errors import InsufficientDataError


def decay_series(n=20):
    return 0.5 ** np.arange(n)


def test_difference_examples():
    np.testing.assert_array_equal(difference([1, 2, 4, 7], 1), [1, 2, 3])
    s = np.array([3.0, 1.0, 4.0])
    np.testing.assert_array_equal(difference(s, 0), s)


def test_difference_needs_data():
    with pytest.raises(InsufficientDataError):
        difference([1.0, 2.0], 2)


@given(arrays(np.float64, st.integers(5, 40), elements=st.floats(-1e3, 1e3)), st.integers(0, 3))
def test_undifference_round_trip(s, d):
    rebuilt = undifference(difference(s, d), s[:d])
    np.testing.assert_allclose(rebuilt, s[d:], rtol=0, atol=1e-12 * max(1.0, np.abs(s).max()) * 10**d)


def test_ar_decay_exact():
    fit = fit_ar_ols(decay_series(), 1)
    assert abs(fit.c) < 1e-10
    assert abs(fit.alpha[0] - 0.5) < 1e-10


def test_ar2_recovery_and_independent_oracle():
    x = synth.ar(5000, alpha=(0.5, -0.25), sigma=0.1, seed=3).values
    fit = fit_ar_ols(x, 2)
    np.testing.assert_allclose(fit.alpha, [0.5, -0.25], atol=0.05)
    design = np.column_stack([np.ones(x.size - 2), x[1:-1], x[:-2]])
    oracle, *_ = np.linalg.lstsq(design, x[2:], rcond=None)
    np.testing.assert_allclose([fit.c, *fit.alpha], oracle, rtol=1e-8, atol=1e-10)


def test_ar_order_zero_rejected():
    with pytest.raises(ValueError):
        fit_ar_ols(decay_series(), 0)


def test_ar_too_short():
    with pytest.raises(InsufficientDataError):
        fit_ar_ols(np.arange(5.0), 3)


def test_forecast_ar_examples():
    assert forecast_ar(ArFit(0.0, np.array([0.5])), [0.25]) == 0.125
    assert forecast_ar(ArFit(1.5, np.zeros(3)), [9.0, 8.0, 7.0]) == 1.5
    s = decay_series(21)
    fit = fit_ar_ols(s[:20], 1)
    assert forecast_ar(fit, [s[19]]) == pytest.approx(s[20], abs=1e-12)


def test_arima_spec_validation():
    with pytest.raises(ValueError):
        ArimaSpec(-1, 0, 0)
    with pytest.raises(ValueError):
        ArimaSpec(0, 0, 0)


def test_arima_pure_ar_equals_ols():
    x = synth.ar(800, alpha=(0.5, -0.25), sigma=0.1, seed=5).values
    a = fit_arima(x, ArimaSpec(1, 0, 0))
    b = fit_ar_ols(x, 1)
    assert a.mu == pytest.approx(b.c, abs=1e-6)
    np.testing.assert_allclose(a.alpha, b.alpha, atol=1e-6)
    assert forecast_arima(a, x) == pytest.approx(forecast_ar(b, [x[-1]]), abs=1e-9)


def test_arma11_recovery():
    x = synth.arma(10000, alpha=0.6, beta=0.3, seed=1).values
    fit = fit_arima(x, ArimaSpec(1, 0, 1))
    assert fit.alpha[0] == pytest.approx(0.6, abs=0.1)
    assert fit.beta[0] == pytest.approx(0.3, abs=0.15)


def test_random_walk_with_drift_on_ramp():
    ramp = 3.0 + 0.7 * np.arange(40)
    fit = fit_arima(ramp, ArimaSpec(0, 1, 0))
    np.testing.assert_allclose(difference(ramp, 1), 0.7)
    assert fit.mu == pytest.approx(0.7, abs=1e-12)
    assert forecast_arima(fit, ramp) == pytest.approx(ramp[-1] + 0.7, abs=1e-10)


def test_arima_beats_naive_on_held_out_arma():
    x = synth.arma(2300, alpha=0.6, beta=0.3, seed=11).values
    fit = fit_arima(x[:2000], ArimaSpec(1, 0, 1))
    model_err, naive_err = [], []
    for k in range(2000, 2300):
        model_err.append((forecast_arima(fit, x[:k]) - x[k]) ** 2)
        naive_err.append((x[k - 1] - x[k]) ** 2)
    assert np.mean(model_err) < np.mean(naive_err)


def test_arima_d2_forecast_continues_quadratic():
    t = np.arange(60.0)
    quad = 0.5 * t**2 + t + 2
    fit = fit_arima(quad, ArimaSpec(0, 2, 0))
    assert forecast_arima(fit, quad) == pytest.approx(0.5 * 60**2 + 60 + 2, abs=1e-8)


def test_method_falls_back_to_last_value():
    m = ArMethod(p=5)
    m.retrain(np.ones(6), 1.0)         # too short, and constant
    assert m.fallback
    assert m.predict(np.array([1.0, 2.0, 3.0])) == 3.0


def test_fit_once_mode_keeps_first_fit():
    x = synth.ar(400, seed=2).values
    m = ArMethod(p=2, refit=False)
    m.retrain(x[:200], x[200])
    first = m.fit
    m.retrain(x[1:201], x[201])
    assert m.fit is first
    m2 = ArimaMethod(1, 1, 1)
    m2.retrain(x[:200], x[200])
    assert np.isfinite(m2.predict(x[1:201]))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6), st.floats(-0.9, 0.9))
def test_ar1_noiseless_recovery(seed, alpha):
    # any nonzero start of a noiseless AR(1) recursion pins the coefficient exactly
    x0 = np.random.default_rng(seed).uniform(1, 10)
    assume(abs(alpha) > 0.05)
    x = x0 * alpha ** np.arange(12)
    fit = fit_ar_ols(x, 1)
    assert fit.alpha[0] == pytest.approx(alpha, abs=1e-6)
