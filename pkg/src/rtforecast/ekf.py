"""Extended Kalman filter and a one-step-ahead forecaster built on it."""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DimensionError, NonFiniteError, SingularSystemError
from .kernel import as_matrix, as_vector, solve_spd
from .scaling import IDENTITY


def numeric_jacobian(fn, x, step=1e-6):
    """Central-difference Jacobian of ``fn`` at ``x``."""
    if step <= 0:
        raise ValueError("step must be positive")
    x = np.asarray(x, dtype=np.float64)
    f0 = np.atleast_1d(fn(x))
    jac = np.empty((f0.size, x.size))
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = step
        jac[:, j] = (np.atleast_1d(fn(x + e)) - np.atleast_1d(fn(x - e))) / (2 * step)
    return jac


@dataclass
class StateSpaceModel:
    """``x' = f(x) + w``, ``y = h(x) + v`` with ``w ~ N(0, q)``, ``v ~ N(0, r)``.

    Jacobians default to central differences when not supplied.
    """

    f: Callable
    h: Callable
    q: np.ndarray
    r: np.ndarray
    jf: Optional[Callable] = None
    jh: Optional[Callable] = None

    def __post_init__(self):
        self.q = as_matrix(self.q, "q")
        self.r = as_matrix(self.r, "r")
        for name, m in (("q", self.q), ("r", self.r)):
            if m.shape[0] != m.shape[1] or not np.allclose(m, m.T):
                raise DimensionError(f"{name} must be a symmetric square matrix")

    @property
    def n(self):
        return self.q.shape[0]

    @property
    def m(self):
        return self.r.shape[0]

    def jac_f(self, x):
        return np.atleast_2d(self.jf(x) if self.jf else numeric_jacobian(self.f, x))

    def jac_h(self, x):
        return np.atleast_2d(self.jh(x) if self.jh else numeric_jacobian(self.h, x))


@dataclass
class EkfState:
    x_hat: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        self.x_hat = as_vector(self.x_hat, "x_hat")
        self.p = as_matrix(self.p, "p")
        if self.p.shape != (self.x_hat.size, self.x_hat.size):
            raise DimensionError("covariance shape does not match the state")


def predict(model, state):
    """Propagate estimate and covariance one step through the dynamics."""
    if state.x_hat.size != model.n:
        raise DimensionError(f"state has {state.x_hat.size} entries, model expects {model.n}")
    jf = model.jac_f(state.x_hat)
    x_prior = np.atleast_1d(np.asarray(model.f(state.x_hat), dtype=np.float64))
    p_prior = jf @ state.p @ jf.T + model.q
    if not (np.all(np.isfinite(x_prior)) and np.all(np.isfinite(p_prior))):
        raise NonFiniteError("EKF prediction produced non-finite values")
    return EkfState(x_prior, p_prior)


def update(model, predicted, y):
    """Assimilate observation ``y`` into the predicted state."""
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    if y.size != model.m:
        raise DimensionError(f"observation has {y.size} entries, model expects {model.m}")
    jh = model.jac_h(predicted.x_hat)
    p = predicted.p
    s = jh @ p @ jh.T + model.r
    try:
        # K = P H^T S^-1, computed as (S^-1 H P)^T since S and P are symmetric
        gain = solve_spd(s, jh @ p).T
    except SingularSystemError as exc:
        raise SingularSystemError(f"degenerate innovation covariance: {exc}") from exc
    innovation = y - np.atleast_1d(model.h(predicted.x_hat))
    x_post = predicted.x_hat + gain @ innovation
    p_post = (np.eye(model.n) - gain @ jh) @ p
    p_post = 0.5 * (p_post + p_post.T)
    if not (np.all(np.isfinite(x_post)) and np.all(np.isfinite(p_post))):
        raise NonFiniteError("EKF update produced non-finite values")
    return EkfState(x_post, p_post)


def local_linear_trend(q_level, q_trend, r):
    """State ``[level, trend]``; the level advances by the trend, only the level is observed."""
    f_mat = np.array([[1.0, 1.0], [0.0, 1.0]])
    h_mat = np.array([[1.0, 0.0]])
    return StateSpaceModel(
        f=lambda x: f_mat @ x,
        h=lambda x: h_mat @ x,
        q=np.diag([q_level, q_trend]),
        r=np.array([[r]]),
        jf=lambda x: f_mat,
        jh=lambda x: h_mat,
    )


def default_financial_model(train, q_scale=1e-4, r_scale=1e-2):
    """Local-linear-trend model and initial state sized from the training values.

    ``Q = diag(q_scale * var)``, ``R = r_scale * var``; the initial level is
    the last training value, the initial trend is the mean first difference,
    and ``P0 = var * I``.
    """
    train = as_vector(train, "train")
    var = float(np.var(train))
    if var <= 0:
        # constant window: keep the filter well-posed with a tiny floor
        var = 1e-8 * (1.0 + float(np.mean(train)) ** 2)
    model = local_linear_trend(q_scale * var, q_scale * var, r_scale * var)
    trend = float(np.mean(np.diff(train))) if train.size > 1 else 0.0
    init = EkfState(np.array([train[-1], trend]), var * np.eye(2))
    return model, init


class EkfForecaster:
    """Scalar one-step forecaster: ``observe`` assimilates, ``predict_next`` forecasts."""

    def __init__(self, model, init):
        if model.m != 1:
            raise DimensionError("EkfForecaster needs a scalar measurement model")
        self.model = model
        self.state = init

    def observe(self, y):
        self.state = update(self.model, predict(self.model, self.state), y)

    def predict_next(self):
        x_next = np.atleast_1d(self.model.f(self.state.x_hat))
        return float(np.atleast_1d(self.model.h(x_next))[0])


class EkfMethod:
    """Harness adapter: assimilates each arrived label, ignores window contents."""

    name = "ekf"
    uses_scaling = False
    retrain_on_first = False

    def __init__(self, q_scale=1e-4, r_scale=1e-2, model=None, init=None):
        self.q_scale = q_scale
        self.r_scale = r_scale
        self._model = model
        self._init = init
        self.filter = None

    def start(self, observed, scaler=IDENTITY):
        model, init = default_financial_model(observed, self.q_scale, self.r_scale)
        self.filter = EkfForecaster(self._model or model, self._init or init)

    def retrain(self, window, label):
        self.filter.observe(label)

    def predict(self, window):
        return self.filter.predict_next()
