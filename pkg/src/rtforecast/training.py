"""Relative-MSE loss, exact BPTT, a finite-difference oracle, ADAM, and the
sequential epoch-selection training loop."""

import csv
import logging
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .errors import DegenerateLabelError, DivergenceError, InsufficientDataError
from .kernel import SeededRng
from .lstm import LstmDims, LstmParams, forward, forward_trace, init_seeded, init_zero
from .scaling import IDENTITY
from .windows import FEEDBACK_MODES, build_window, label_index

log = logging.getLogger(__name__)

Gradients = LstmParams


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    init: str = "seeded"
    init_scale: float = 0.1
    seed: int = 0
    hidden_dim: int = 8
    num_layers: int = 1
    reset_adam: bool = False
    feedback: str = "prediction"

    def __post_init__(self):
        problems = []
        if self.epochs < 1:
            problems.append("epochs must be >= 1")
        if not 0 < self.beta1 < 1 or not 0 < self.beta2 < 1:
            problems.append("ADAM betas must lie in (0, 1)")
        if self.epsilon <= 0 or self.learning_rate <= 0:
            problems.append("learning_rate and epsilon must be positive")
        if self.init not in ("seeded", "zero"):
            problems.append(f"init must be 'seeded' or 'zero', got {self.init!r}")
        if self.feedback not in FEEDBACK_MODES:
            problems.append(f"feedback must be one of {FEEDBACK_MODES}")
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def dims(self):
        return LstmDims(self.hidden_dim, self.num_layers, 1)

    def initial_params(self):
        if self.init == "zero":
            return init_zero(self.dims)
        return init_seeded(self.dims, SeededRng(self.seed), self.init_scale)


@dataclass
class EpochRecord:
    epoch_index: int
    loss: float
    snapshot: LstmParams


@dataclass
class AdamState:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    m: np.ndarray = None
    v: np.ndarray = None

    @classmethod
    def from_config(cls, cfg):
        return cls(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon)


def loss_relative_mse(pred, label):
    if label == 0:
        raise DegenerateLabelError("relative loss is undefined for a zero label")
    return (pred - label) ** 2 / label**2


def _loss_and_slope(pred, label, scaler):
    # Loss is measured on the original scale; the slope is w.r.t. the model-space prediction.
    p = scaler.inverse(pred)
    y = scaler.inverse(label)
    loss = loss_relative_mse(p, y)
    return loss, 2.0 * (p - y) / (y * y) * scaler.span


def loss_at(params, window, label, scaler=IDENTITY):
    return _loss_and_slope(forward(params, window), label, scaler)[0]


def _backprop_layer(trace, dh_ext):
    S, H4 = trace.gates.shape
    H = H4 // 4
    gates = trace.gates
    f, i, ct, o = gates[:, :H], gates[:, H:2 * H], gates[:, 2 * H:3 * H], gates[:, 3 * H:]
    tc = trace.tanh_c
    # per-step coefficients that do not depend on the backward recursion
    d_act = gates * (1.0 - gates)
    d_act[:, 2 * H:3 * H] = 1.0 - ct * ct
    coef_c = np.hstack([trace.c[:-1], ct, i]) * d_act[:, :3 * H]
    coef_o = tc * d_act[:, 3 * H:]
    o_dtc = o * (1.0 - tc * tc)
    w_h_t = trace.w[:, :H].T.copy()

    da = np.empty((S, H4))
    dh_next = np.zeros(H)
    dc_next = np.zeros(H)
    for s in range(S - 1, -1, -1):
        dh = dh_ext[s] + dh_next
        dc = dc_next + dh * o_dtc[s]
        da[s, :3 * H] = np.tile(dc, 3) * coef_c[s]
        da[s, 3 * H:] = dh * coef_o[s]
        dh_next = w_h_t @ da[s]
        dc_next = dc * f[s]

    z = np.hstack([trace.h[:-1], trace.inputs])
    d_w = da.T @ z
    d_b = da.sum(axis=0)
    d_x = da @ trace.w[:, H:]
    return d_w, d_b, d_x


def bptt_gradients(params, window, label, scaler=IDENTITY):
    """Exact loss and gradient for one (window, label) instance."""
    pred, traces = forward_trace(params, window)
    loss, slope = _loss_and_slope(pred, label, scaler)
    H = params.dims.hidden_dim
    top = traces[-1]
    S = top.gates.shape[0]

    flat_layers = [None] * len(traces)
    dh_ext = np.zeros((S, H))
    dh_ext[-1] = slope * params.readout_w
    for k in range(len(traces) - 1, -1, -1):
        d_w, d_b, d_x = _backprop_layer(traces[k], dh_ext)
        pieces = [d_w[g * H:(g + 1) * H].ravel() for g in range(4)]
        pieces += [d_b[g * H:(g + 1) * H] for g in range(4)]
        flat_layers[k] = np.concatenate(pieces)
        dh_ext = d_x

    flat = np.concatenate(flat_layers + [slope * top.h[-1], [slope]])
    if not np.all(np.isfinite(flat)):
        raise DivergenceError("BPTT produced non-finite gradients")
    return loss, LstmParams.from_flat(params.dims, flat)


def _oracle_loss(params, window, label, scaler, dtype):
    # Independent straight-line forward pass; no shared code with lstm.forward.
    one = dtype(1)
    xs = [np.array([dtype(v)]) for v in np.asarray(window, dtype=np.float64)]
    for layer in params.layers:
        mats = [layer.w_f, layer.w_i, layer.w_c, layer.w_o]
        mats = [m.astype(dtype) for m in mats]
        biases = [b.astype(dtype) for b in (layer.b_f, layer.b_i, layer.b_c, layer.b_o)]
        h = np.zeros(layer.hidden_dim, dtype=dtype)
        c = np.zeros(layer.hidden_dim, dtype=dtype)
        out = []
        for x in xs:
            z = np.concatenate([h, x])
            f = one / (one + np.exp(-(mats[0] @ z + biases[0])))
            i = one / (one + np.exp(-(mats[1] @ z + biases[1])))
            g = np.tanh(mats[2] @ z + biases[2])
            o = one / (one + np.exp(-(mats[3] @ z + biases[3])))
            c = f * c + i * g
            h = o * np.tanh(c)
            out.append(h)
        xs = out
    pred = params.readout_w.astype(dtype) @ xs[-1] + dtype(params.readout_b)
    span, lo = dtype(scaler.span), dtype(scaler.lo)
    p = pred * span + lo
    y = dtype(label) * span + lo
    if y == 0:
        raise DegenerateLabelError("relative loss is undefined for a zero label")
    return (p - y) ** 2 / (y * y)


def fd_gradient_oracle(params, window, label, step=1e-5, scaler=IDENTITY, dtype=np.longdouble):
    """Central-difference gradient, one parameter at a time.

    Losses are evaluated in ``dtype`` (extended precision by default) by a
    separate forward implementation, so float64 round-off in the loss does
    not swamp gradients of order 1e-8.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    theta = params.to_flat()
    grad = np.empty_like(theta)
    delta = dtype(step)
    for k in range(theta.size):
        orig = theta[k]
        theta[k] = orig + step
        up = _oracle_loss(LstmParams.from_flat(params.dims, theta), window, label, scaler, dtype)
        theta[k] = orig - step
        down = _oracle_loss(LstmParams.from_flat(params.dims, theta), window, label, scaler, dtype)
        theta[k] = orig
        grad[k] = float((up - down) / (2 * delta))
    return LstmParams.from_flat(params.dims, grad)


def relative_gradient_error(exact, approx, floor=1e-8):
    """Max over parameters of ``|g - g_fd| / max(|g|, floor)``."""
    g = exact.to_flat() if isinstance(exact, LstmParams) else np.asarray(exact)
    a = approx.to_flat() if isinstance(approx, LstmParams) else np.asarray(approx)
    return float(np.max(np.abs(g - a) / np.maximum(np.abs(g), floor)))


def adam_update(theta, grad, state):
    """Bias-corrected ADAM on flat arrays; returns new ``(theta, state)``."""
    theta = np.asarray(theta, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    m = np.zeros_like(theta) if state.m is None else state.m
    v = np.zeros_like(theta) if state.v is None else state.v
    t = state.step_count + 1
    m = state.beta1 * m + (1 - state.beta1) * grad
    v = state.beta2 * v + (1 - state.beta2) * grad * grad
    m_hat = m / (1 - state.beta1**t)
    v_hat = v / (1 - state.beta2**t)
    theta = theta - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return theta, replace(state, step_count=t, m=m, v=v)


def adam_step(params, grads, state):
    theta, state = adam_update(params.to_flat(), grads.to_flat(), state)
    return LstmParams.from_flat(params.dims, theta), state


class IterationResult(NamedTuple):
    best: LstmParams
    records: list
    adam: AdamState


def train_one_iteration(lstm1, window, label, cfg, adam=None, scaler=IDENTITY):
    """Train for ``cfg.epochs`` epochs on one instance and keep the least-loss snapshot.

    Each record pairs a loss with the parameters that produced it (taken
    before that epoch's ADAM update), so the returned snapshot attains the
    recorded minimum exactly. Ties go to the earliest epoch.
    """
    if adam is None:
        adam = AdamState.from_config(cfg)
    dims = lstm1.dims
    theta = lstm1.to_flat()
    records = []
    for epoch in range(1, cfg.epochs + 1):
        params = LstmParams.from_flat(dims, theta)
        loss, grads = bptt_gradients(params, window, label, scaler)
        records.append(EpochRecord(epoch, loss, params))
        theta, adam = adam_update(theta, grads.to_flat(), adam)
    best = min(records, key=lambda r: r.loss)
    return IterationResult(best.snapshot, records, adam)


class SequentialLstm:
    """Rolling forecaster that retrains one LSTM per iteration (harness protocol)."""

    name = "lstm"
    uses_scaling = True
    retrain_on_first = True

    def __init__(self, cfg=None, params=None):
        self.cfg = cfg or TrainConfig()
        self.params = params if params is not None else self.cfg.initial_params()
        self.adam = AdamState.from_config(self.cfg)
        self.scaler = IDENTITY
        self.history = []   # one list of EpochRecord per retrain call

    def start(self, observed, scaler=IDENTITY):
        self.scaler = scaler

    def retrain(self, window, label):
        adam = AdamState.from_config(self.cfg) if self.cfg.reset_adam else self.adam
        result = train_one_iteration(self.params, window, label, self.cfg, adam, self.scaler)
        self.params, self.adam = result.best, result.adam
        self.history.append(result.records)

    def predict(self, window):
        return forward(self.params, window)


@dataclass
class SequentialResult:
    predictions: np.ndarray
    final: LstmParams
    records: list
    next_forecast: float
    windows: list = field(default_factory=list)
    labels: list = field(default_factory=list)


def sequential_forecast_lstm(series, T, N, cfg=None, scaler=IDENTITY):
    """Iterations ``t = 1 .. N + 1``: train on ``X(t)`` with label ``x(T+t-1)``,
    then forecast ``x(T+t)`` from ``X(t+1)``.

    ``scaler`` maps values into model space; predictions come back in the
    original units. Returns the ``N`` in-horizon predictions plus the
    forecast for ``T + N + 1`` produced by the last iteration.
    """
    cfg = cfg or TrainConfig()
    values = np.asarray(getattr(series, "values", series), dtype=np.float64)
    if not 1 <= N < T:
        raise ValueError(f"need 1 <= N < T, got T={T}, N={N}")
    if values.size < T + N:
        raise InsufficientDataError(f"series has {values.size} points, need at least T+N={T + N}")
    observed = scaler.transform(values[:T + N])
    model = SequentialLstm(cfg)
    model.start(observed[:T], scaler)

    predicted = {}
    windows, labels = [], []
    for t in range(1, N + 2):
        window = build_window(t, T, observed, predicted, cfg.feedback)
        label = observed[label_index(t, T) - 1]
        windows.append(window)
        labels.append(label)
        model.retrain(window, label)
        predicted[T + t] = model.predict(build_window(t + 1, T, observed, predicted, cfg.feedback))

    preds = np.array([scaler.inverse(predicted[T + k]) for k in range(1, N + 1)])
    return SequentialResult(
        preds, model.params, model.history, scaler.inverse(predicted[T + N + 1]), windows, labels
    )


def write_training_log(path, history):
    """CSV ``t,l,loss`` with one row per epoch of every iteration."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "l", "loss"])
        for t, records in enumerate(history, start=1):
            for rec in records:
                writer.writerow([t, rec.epoch_index, repr(rec.loss)])


def gradient_check(instances=100, hidden_dim=4, window=10, num_layers=1, seed=0, step=1e-5):
    """BPTT vs central differences on seeded random instances.

    Returns the per-instance maximum relative error (denominator
    ``max(|g|, 1e-8)``).
    """
    dims = LstmDims(hidden_dim, num_layers, 1)
    errors = []
    for k in range(instances):
        rng = SeededRng(seed + k)
        params = init_seeded(dims, rng, 0.5)
        xs = rng.uniform(-1.0, 1.0, window)
        label = rng.uniform(0.5, 2.0)
        _, exact = bptt_gradients(params, xs, label)
        approx = fd_gradient_oracle(params, xs, label, step)
        errors.append(relative_gradient_error(exact, approx))
    return errors
