"""Real-time one-step-ahead forecasting with sequentially trained many-to-one LSTMs,
compared against EKF, AR and ARIMA baselines."""

from .harness import (
    MethodSpec,
    RunReport,
    TimeSeries,
    compare_methods,
    metric_e,
    rolling_forecast,
)
from .lstm import LstmDims, LstmParams, forward, init_seeded, init_zero
from .training import TrainConfig, sequential_forecast_lstm, train_one_iteration

__version__ = "0.1.0"

__all__ = [
    "LstmDims",
    "LstmParams",
    "MethodSpec",
    "RunReport",
    "TimeSeries",
    "TrainConfig",
    "compare_methods",
    "forward",
    "init_seeded",
    "init_zero",
    "metric_e",
    "rolling_forecast",
    "sequential_forecast_lstm",
    "train_one_iteration",
]
