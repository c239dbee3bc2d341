import json
import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rtforecast.errors import DegenerateScaleError, InsufficientDataError
from rtforecast.harness import (
    ForecastRecord,
    Forecaster,
    MethodSpec,
    NaiveLastValue,
    Oracle,
    RunReport,
    TimeSeries,
    compare_methods,
    derive_seed,
    metric_e,
    rolling_forecast,
    run_method,
)
from rtforecast.kernel import SeededRng
from rtforecast.scaling import IDENTITY, inverse_scale, min_max_scale
from rtforecast.windows import plan


class Recorder(Forecaster):
    """Logs every window it is shown and predicts 100 + call number."""

    name = "recorder"

    def __init__(self, scaled=False, retrain_first=True):
        self.uses_scaling = scaled
        self.retrain_on_first = retrain_first
        self.trained, self.shown, self.started = [], [], None

    def start(self, observed, scaler=IDENTITY):
        self.started = (np.array(observed), scaler)

    def retrain(self, window, label):
        self.trained.append((list(window), label))

    def predict(self, window):
        self.shown.append(list(window))
        return 100.0 + len(self.shown)


class Flaky(Forecaster):
    name = "flaky"

    def __init__(self, bad_calls):
        self.bad_calls, self.calls = set(bad_calls), 0

    def predict(self, window):
        self.calls += 1
        if self.calls in self.bad_calls:
            raise RuntimeError("boom")
        return float(window[-1])


def records(pairs):
    return [ForecastRecord.make(k, p, o) for k, (p, o) in enumerate(pairs, start=1)]


# --- metric ---------------------------------------------------------------

def test_metric_hand_cases():
    assert metric_e(records([(1.0, 1.0), (2.0, 2.0)])) == 0.0
    assert metric_e(records([(1.1, 1.0)])) == pytest.approx(0.1, abs=1e-15)
    assert metric_e(records([(1.1, 1.0), (1.3, 1.0)])) == pytest.approx(0.2, abs=1e-15)


def test_metric_errors():
    with pytest.raises(ValueError):
        metric_e([])
    with pytest.raises(ValueError):
        metric_e(records([(1.0, 0.0)]))
    assert metric_e(records([(1.0, 0.0), (1.1, 1.0)]), skip_undefined=True) == pytest.approx(0.1)


# --- scaling --------------------------------------------------------------

def test_min_max_examples():
    scaler, scaled = min_max_scale([10.0, 20.0, 30.0])
    np.testing.assert_allclose(scaled, [0, 0.5, 1])
    assert scaler.transform(40.0) == pytest.approx(1.5)
    with pytest.raises(DegenerateScaleError):
        min_max_scale([4.0, 4.0])


@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=30, unique=True))
def test_scale_round_trip(values):
    scaler, scaled = min_max_scale(values)
    np.testing.assert_allclose(inverse_scale(scaler, scaled), values, rtol=1e-12, atol=1e-12 * scaler.span)


# --- rolling scheme -------------------------------------------------------

def test_window_sequence_T4_N2():
    x = np.array([10.0, 20.0, 30.0, 40.0, 50.0, 60.0])
    fc = Recorder()
    report = rolling_forecast(fc, TimeSeries("toy", None, x), 4, 2)
    assert fc.trained == [([10, 20, 30], 40), ([20, 30, 40], 50), ([30, 40, 101], 60)]
    assert fc.shown == [[20, 30, 40], [30, 40, 101], [40, 101, 102]]
    assert [r.t for r in report.records] == [5, 6]
    assert [r.predicted for r in report.records] == [101.0, 102.0]
    assert report.next_forecast == 103.0
    assert report.retrain_calls == 3


def test_plan_matches_hand_enumeration():
    rows = plan(4, 2)
    assert rows[0][1:3] == (["x(1)", "x(2)", "x(3)"], "x(4)")
    assert rows[1][1:3] == (["x(2)", "x(3)", "x(4)"], "x(5)")
    assert rows[2][1:3] == (["x(3)", "x(4)", "xhat(5)"], "x(6)")


def test_observation_feedback_windows():
    x = np.arange(1.0, 8.0)
    fc = Recorder()
    rolling_forecast(fc, x, 4, 3, feedback="observation")
    assert fc.shown == [[2, 3, 4], [3, 4, 5], [4, 5, 6], [5, 6, 7]]


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 12), st.data())
def test_window_lengths_and_retrain_counts(T, data):
    N = data.draw(st.integers(1, T - 1))
    x = np.arange(1.0, T + N + 1)
    lstm_like, filt = Recorder(), Recorder(retrain_first=False)
    a = rolling_forecast(lstm_like, x, T, N)
    b = rolling_forecast(filt, x, T, N)
    assert a.retrain_calls == N + 1 and b.retrain_calls == N
    for fc in (lstm_like, filt):
        assert all(len(w) == T - 1 for w, _ in fc.trained)
        assert all(len(w) == T - 1 for w in fc.shown)
    for t, (w, _) in enumerate(lstm_like.trained, start=1):
        assert sum(v > 100 for v in w) == max(0, t - 2)


def test_oracle_and_naive_baselines():
    r = SeededRng(0)
    x = 50 + r.normal(size=60).cumsum()
    assert rolling_forecast(Oracle(x), x, 40, 15).metric_e == 0.0
    assert rolling_forecast(NaiveLastValue(), np.full(30, 3.0), 20, 5).metric_e == 0.0


def test_scaled_forecaster_sees_unit_range_and_outputs_original_units():
    x = np.array([10.0, 30.0, 20.0, 40.0, 50.0, 60.0])
    fc = Recorder(scaled=True)
    report = rolling_forecast(fc, x, 4, 2)
    observed, scaler = fc.started
    np.testing.assert_allclose(observed, [0, 2 / 3, 1 / 3, 1])
    # prediction 101 in model space maps back through the scaler fitted on x(1..T)
    assert report.records[0].predicted == pytest.approx(101 * 30 + 10)
    assert report.scaler == {"lo": 10.0, "hi": 40.0}


def test_constant_window_falls_back_to_identity(caplog):
    fc = Recorder(scaled=True)
    with caplog.at_level(logging.WARNING):
        report = rolling_forecast(fc, np.full(8, 2.0), 5, 2)
    assert "unscaled" in caplog.text
    assert report.scaler["lo"] == 0.0 and report.scaler["hi"] == 1.0


def test_metric_recomputes_exactly():
    r = SeededRng(4)
    x = 10 + r.normal(size=50).cumsum() * 0.1
    rep = run_method(TimeSeries("s", None, x), MethodSpec("ar", params={"p": 2}), 30, 15)
    assert metric_e(rep.records) == rep.metric_e


@pytest.mark.parametrize("factor", [4.0, 0.5])
def test_relative_metric_is_scale_invariant(factor):
    r = SeededRng(5)
    x = 20 + r.normal(size=50).cumsum()
    for make in (NaiveLastValue, lambda: None):
        a = rolling_forecast(make() or Oracle(x), x, 30, 12).metric_e
        b = rolling_forecast(make() or Oracle(x * factor), x * factor, 30, 12).metric_e
        assert a == b


def test_step_failures_recorded_and_run_continues():
    x = np.arange(1.0, 20.0)
    report = rolling_forecast(Flaky({2}), x, 10, 5)
    assert report.status == "ok"
    assert report.failed_steps == 1
    assert report.records[1].predicted is None
    assert report.failures[0]["t"] == 12
    assert report.metric_e is not None


def test_three_consecutive_failures_abort():
    x = np.arange(1.0, 30.0)
    report = rolling_forecast(Flaky({2, 3, 4}), x, 15, 10)
    assert report.status == "aborted"
    assert len(report.records) == 4


def test_zero_observations_excluded_and_counted():
    x = np.array([1.0, 2.0, 3.0, 4.0, 0.0, 5.0, 6.0])
    report = rolling_forecast(NaiveLastValue(), x, 4, 3, feedback="observation")
    assert report.excluded_steps == 1
    assert report.records[0].relative_error is None
    assert report.metric_e == pytest.approx((abs(0 - 5) / 5 + abs(5 - 6) / 6) / 2)


def test_preconditions():
    with pytest.raises(ValueError):
        rolling_forecast(NaiveLastValue(), np.arange(1.0, 10.0), 4, 4)
    with pytest.raises(InsufficientDataError):
        rolling_forecast(NaiveLastValue(), np.arange(1.0, 10.0), 8, 3)


def test_time_series_validation():
    with pytest.raises(ValueError):
        TimeSeries("x", [1, 1, 2], [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        TimeSeries("x", None, [1.0, np.inf])
    with pytest.raises(InsufficientDataError):
        TimeSeries("x", None, [1.0])


# --- comparisons and reports ----------------------------------------------

def noisy_series(n=80, seed=1):
    r = SeededRng(seed)
    return TimeSeries("noisy", None, 100 + r.normal(size=n).cumsum())


def test_compare_ranks_oracle_first():
    s = noisy_series()
    reports = compare_methods(s, [MethodSpec("naive"), MethodSpec("oracle")], 60, 10)
    assert [r.method for r in reports] == ["oracle", "naive"]
    assert reports[0].metric_e == 0.0


def test_compare_same_method_twice_is_deterministic():
    s = noisy_series()
    lstm = {"epochs": 3, "hidden_dim": 3}
    reports = compare_methods(s, [MethodSpec("a", "lstm", lstm), MethodSpec("b", "lstm", lstm)], 60, 5, run_seed=3)
    assert reports[0].metric_e == reports[1].metric_e


def test_compare_isolates_failures():
    s = noisy_series()
    reports = compare_methods(s, [MethodSpec("bad", "ar", {"p": 500}), MethodSpec("naive")], 60, 10)
    # an AR order too large for the window degrades to last-value forecasts rather than failing
    assert all(r.status == "ok" for r in reports)
    assert reports[0].metric_e == reports[1].metric_e
    broken = compare_methods(s, [MethodSpec("x", "ar", {"nonsense": 1}), MethodSpec("naive")], 60, 10)
    assert broken[-1].status == "failed" and broken[-1].metric_e is None
    assert broken[0].status == "ok"


def test_compare_with_workers_matches_serial():
    s = noisy_series()
    methods = [MethodSpec("naive"), MethodSpec("ar", params={"p": 2}), MethodSpec("ekf")]
    serial = compare_methods(s, methods, 60, 10)
    parallel = compare_methods(s, methods, 60, 10, workers=2)
    assert [r.to_json() for r in serial] == [r.to_json() for r in parallel]


def test_report_json_round_trip():
    rep = run_method(noisy_series(), MethodSpec("ekf"), 60, 10)
    text = rep.to_json()
    assert "wall_time_s" not in text
    assert "wall_time_s" in rep.to_json(include_timing=True)
    again = RunReport.from_dict(json.loads(text))
    assert again.to_json() == text


def test_derived_seed_depends_on_kind_and_seed():
    assert derive_seed(1, "lstm") == derive_seed(1, "lstm")
    assert derive_seed(1, "lstm") != derive_seed(2, "lstm")
    assert derive_seed(1, "lstm") != derive_seed(1, "ar")
