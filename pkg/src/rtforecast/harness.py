"""Real-time rolling evaluation over any forecaster, the relative error metric,
and multi-method comparison runs."""

import json
import logging
import math
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .arma import ArimaMethod, ArMethod
from .ekf import EkfMethod
from .errors import DegenerateScaleError, InsufficientDataError
from .scaling import IDENTITY, min_max_scale
from .training import SequentialLstm, TrainConfig
from .windows import FEEDBACK_MODES, build_window, label_index

log = logging.getLogger(__name__)

REPORT_SCHEMA = "rtforecast-report-v1"
MAX_CONSECUTIVE_FAILURES = 3


@dataclass
class TimeSeries:
    id: str
    timestamps: list
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if self.timestamps is None:
            self.timestamps = list(range(1, self.values.size + 1))
        self.timestamps = list(self.timestamps)
        if self.values.size < 2:
            raise InsufficientDataError("a time series needs at least 2 values")
        if len(self.timestamps) != self.values.size:
            raise ValueError("timestamps and values differ in length")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("time series values must be finite")
        for a, b in zip(self.timestamps, self.timestamps[1:]):
            if not a < b:
                raise ValueError(f"timestamps must be strictly increasing ({a!r} then {b!r})")

    def __len__(self):
        return self.values.size


class Forecaster:
    """Protocol used by ``rolling_forecast``.

    ``start`` receives the observed values ``x(1..T)`` (in model space when
    the method is scaled) once per run; ``retrain`` receives each window and
    its true label; ``predict`` maps a window to the next value.
    """

    name = "forecaster"
    uses_scaling = False
    retrain_on_first = True

    def start(self, observed, scaler=IDENTITY):
        pass

    def retrain(self, window, label):
        pass

    def predict(self, window):
        raise NotImplementedError


class NaiveLastValue(Forecaster):
    name = "naive"

    def predict(self, window):
        return float(window[-1])


class Oracle(Forecaster):
    """Test aid that returns the true next value; ``k``-th call gives ``x(T+k)``."""

    name = "oracle"

    def __init__(self, values):
        self.values = np.asarray(values, dtype=np.float64)
        self._next = None

    def start(self, observed, scaler=IDENTITY):
        self._next = len(observed)

    def predict(self, window):
        value = float(self.values[self._next])
        self._next += 1
        return value


@dataclass
class ForecastRecord:
    t: int
    predicted: float
    observed: float
    relative_error: float

    @classmethod
    def make(cls, t, predicted, observed):
        if predicted is None or observed == 0:
            err = None
        else:
            err = abs(predicted - observed) / abs(observed)
        return cls(t, predicted, observed, err)


def metric_e(records, skip_undefined=False):
    """Mean relative absolute error over the forecast steps."""
    if not records:
        raise ValueError("no forecast records")
    errors = []
    for rec in records:
        if rec.observed == 0 or rec.predicted is None:
            if skip_undefined:
                continue
            raise ValueError(f"relative error undefined at t={rec.t}")
        errors.append(abs(rec.predicted - rec.observed) / abs(rec.observed))
    if not errors:
        raise ValueError("no step has a defined relative error")
    return math.fsum(errors) / len(errors)


@dataclass
class RunReport:
    series_id: str
    method: str
    config: dict
    records: list
    metric_e: float
    wall_time: float = 0.0
    scaler: dict = None
    retrain_calls: int = 0
    excluded_steps: int = 0
    failed_steps: int = 0
    status: str = "ok"
    error: str = None
    next_forecast: float = None
    failures: list = field(default_factory=list)

    def to_dict(self, include_timing=False):
        out = {
            "schema": REPORT_SCHEMA,
            "series_id": self.series_id,
            "method": self.method,
            "config": self.config,
            "status": self.status,
            "error": self.error,
            "metric_e": self.metric_e,
            "scaler": self.scaler,
            "retrain_calls": self.retrain_calls,
            "excluded_steps": self.excluded_steps,
            "failed_steps": self.failed_steps,
            "failures": self.failures,
            "next_forecast": self.next_forecast,
            "records": [
                {"t": r.t, "predicted": r.predicted, "observed": r.observed,
                 "relative_error": r.relative_error}
                for r in self.records
            ],
        }
        if include_timing:
            out["wall_time_s"] = self.wall_time
        return out

    def to_json(self, include_timing=False):
        return json.dumps(self.to_dict(include_timing), indent=2, sort_keys=True, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, data):
        records = [ForecastRecord(**r) for r in data["records"]]
        return cls(
            series_id=data["series_id"], method=data["method"], config=data["config"],
            records=records, metric_e=data["metric_e"], wall_time=data.get("wall_time_s", 0.0),
            scaler=data.get("scaler"), retrain_calls=data.get("retrain_calls", 0),
            excluded_steps=data.get("excluded_steps", 0), failed_steps=data.get("failed_steps", 0),
            status=data.get("status", "ok"), error=data.get("error"),
            next_forecast=data.get("next_forecast"), failures=data.get("failures", []),
        )


def _finite_or_none(value):
    try:
        value = float(value)
    except (TypeError, ValueError):
        return None
    return value if math.isfinite(value) else None


def rolling_forecast(fc, series, T, N, scaling=None, feedback="prediction", config=None):
    """Run the real-time scheme and score the ``N`` one-step forecasts.

    Iteration ``t`` (``1 .. N+1``) retrains on ``X(t)`` with label
    ``x(T+t-1)`` (skipped at ``t = 1`` for filters that already consumed
    the training data), then forecasts ``x(T+t)`` from ``X(t+1)``. The final
    iteration's forecast lies past the horizon and is reported as
    ``next_forecast``.
    """
    if not isinstance(series, TimeSeries):
        series = TimeSeries("series", None, series)
    if not 1 <= N < T:
        raise ValueError(f"need 1 <= N < T, got T={T}, N={N}")
    if len(series) < T + N:
        raise InsufficientDataError(f"series has {len(series)} points, need T+N={T + N}")
    if feedback not in FEEDBACK_MODES:
        raise ValueError(f"unknown feedback mode {feedback!r}")
    scaling = fc.uses_scaling if scaling is None else scaling

    raw = series.values[:T + N]
    scaler = IDENTITY
    if scaling:
        try:
            scaler, _ = min_max_scale(raw[:T])
        except DegenerateScaleError:
            log.warning("constant training window; %s runs unscaled", fc.name)
    observed = scaler.transform(raw) if scaling else raw.copy()

    started = time.perf_counter()
    fc.start(observed[:T], scaler)
    predicted = {}
    records, failures = [], []
    retrain_calls = 0
    consecutive = 0
    status, error = "ok", None
    next_forecast = None

    for t in range(1, N + 2):
        target = T + t
        try:
            if t > 1 or fc.retrain_on_first:
                fc.retrain(build_window(t, T, observed, predicted, feedback),
                           observed[label_index(t, T) - 1])
                retrain_calls += 1
            value = _finite_or_none(fc.predict(build_window(t + 1, T, observed, predicted, feedback)))
            problem = None if value is not None else "non-finite prediction"
        except Exception as exc:  # isolate per-step failures
            value, problem = None, f"{type(exc).__name__}: {exc}"

        if value is None:
            consecutive += 1
            failures.append({"t": target, "error": problem})
            # keep the window well-defined by repeating the latest entry
            predicted[target] = build_window(t + 1, T, observed, predicted, feedback)[-1]
        else:
            consecutive = 0
            predicted[target] = value

        out = None if value is None else _finite_or_none(scaler.inverse(value)) if scaling else value
        if t <= N:
            records.append(ForecastRecord.make(target, out, float(raw[target - 1])))
        else:
            next_forecast = out
        if consecutive >= MAX_CONSECUTIVE_FAILURES:
            status, error = "aborted", f"{consecutive} consecutive failed predictions"
            break

    excluded = sum(1 for r in records if r.observed == 0 and r.predicted is not None)
    failed = sum(1 for r in records if r.predicted is None)
    try:
        metric = metric_e(records, skip_undefined=True)
    except ValueError as exc:
        metric, status = None, "failed"
        error = error or str(exc)
    if excluded:
        log.warning("%d steps with zero observations excluded from the metric", excluded)

    return RunReport(
        series_id=series.id,
        method=getattr(fc, "name", type(fc).__name__),
        config=config or {"T": T, "N": N, "feedback": feedback, "scaling": bool(scaling)},
        records=records,
        metric_e=metric,
        wall_time=time.perf_counter() - started,
        scaler={"lo": scaler.lo, "hi": scaler.hi} if scaling else None,
        retrain_calls=retrain_calls,
        excluded_steps=excluded,
        failed_steps=failed,
        status=status,
        error=error,
        next_forecast=next_forecast,
        failures=failures,
    )


@dataclass
class MethodSpec:
    name: str
    kind: str = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.kind = self.kind or self.name


METHOD_KINDS = ("lstm", "ekf", "ar", "arima", "naive", "oracle")

LSTM_KEYS = {"epochs", "learning_rate", "beta1", "beta2", "epsilon", "init", "init_scale",
             "seed", "hidden_dim", "num_layers", "reset_adam"}
METHOD_KEYS = {
    "lstm": LSTM_KEYS | {"scaling"},
    "ekf": {"q_scale", "r_scale", "scaling"},
    "ar": {"p", "refit", "scaling"},
    "arima": {"p", "d", "q", "refit", "scaling"},
    "naive": {"scaling"},
    "oracle": {"scaling"},
}


def derive_seed(run_seed, kind):
    """Per-method seed that depends only on the run seed and the method kind."""
    ss = np.random.SeedSequence([int(run_seed), zlib.crc32(kind.encode())])
    return int(ss.generate_state(1)[0])


def build_forecaster(spec, values, run_seed=0):
    """Instantiate the forecaster for ``spec``; returns ``(forecaster, resolved_params)``."""
    params = dict(spec.params)
    unknown = set(params) - METHOD_KEYS.get(spec.kind, set())
    if spec.kind not in METHOD_KINDS:
        raise ValueError(f"unknown method kind {spec.kind!r}")
    if unknown:
        raise ValueError(f"unknown parameters for {spec.kind}: {sorted(unknown)}")
    if spec.kind == "lstm":
        params.setdefault("seed", derive_seed(run_seed, spec.kind))
        cfg = TrainConfig(**{k: v for k, v in params.items() if k in LSTM_KEYS})
        fc = SequentialLstm(cfg)
        resolved = {k: getattr(cfg, k) for k in sorted(LSTM_KEYS)}
    elif spec.kind == "ekf":
        fc = EkfMethod(params.get("q_scale", 1e-4), params.get("r_scale", 1e-2))
        resolved = {"q_scale": fc.q_scale, "r_scale": fc.r_scale}
    elif spec.kind == "ar":
        fc = ArMethod(int(params.get("p", 5)), bool(params.get("refit", True)))
        resolved = {"p": fc.p, "refit": fc.refit}
    elif spec.kind == "arima":
        fc = ArimaMethod(int(params.get("p", 1)), int(params.get("d", 1)), int(params.get("q", 1)),
                         bool(params.get("refit", True)))
        resolved = {"p": fc.spec.p, "d": fc.spec.d, "q": fc.spec.q, "refit": fc.refit}
    elif spec.kind == "naive":
        fc, resolved = NaiveLastValue(), {}
    else:
        fc, resolved = Oracle(values), {}
    fc.name = spec.name
    if "scaling" in params:
        resolved["scaling"] = bool(params["scaling"])
    return fc, resolved


def run_method(series, spec, T, N, feedback="prediction", run_seed=0, echo=None, return_forecaster=False):
    """Build and run one method; failures come back as a report with status ``failed``.

    ``echo`` (typically the resolved run configuration) is embedded in the
    report's config under ``run_config`` so the run can be replayed.
    """
    fc = None
    config = {"T": T, "N": N, "feedback": feedback, "run_seed": run_seed,
              "method": {"name": spec.name, "kind": spec.kind, "params": dict(spec.params)}}
    if echo is not None:
        config["run_config"] = echo
    try:
        fc, resolved = build_forecaster(spec, series.values, run_seed)
        scaling = resolved.get("scaling", fc.uses_scaling)
        config["method"]["params"] = resolved
        config["scaling"] = bool(scaling)
        report = rolling_forecast(fc, series, T, N, scaling, feedback, config)
    except Exception as exc:
        log.error("method %s failed: %s", spec.name, exc)
        report = RunReport(series.id, spec.name, config, [], None, status="failed",
                           error=f"{type(exc).__name__}: {exc}")
    return (report, fc) if return_forecaster else report


def _run_method_args(args):
    return run_method(*args)


def _sort_key(report):
    return (report.metric_e is None, report.metric_e if report.metric_e is not None else 0.0)


def compare_methods(series, methods, T, N, feedback="prediction", run_seed=0, workers=1):
    """One rolling run per method on identical data; reports sorted by the metric (best first)."""
    if not methods:
        raise ValueError("compare_methods needs at least one method")
    jobs = [(series, spec, T, N, feedback, run_seed) for spec in methods]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_run_method_args, jobs))
    else:
        reports = [run_method(*job) for job in jobs]
    return sorted(reports, key=_sort_key)


def plot_rows(report):
    """Rows ``(t, observed, predicted, abs_diff)`` for plotting."""
    rows = []
    for r in report.records:
        diff = None if r.predicted is None else abs(r.observed - r.predicted)
        rows.append((r.t, r.observed, r.predicted, diff))
    return rows
