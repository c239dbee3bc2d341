"""Differencing, AR by least squares, and ARIMA by two-stage Hannan-Rissanen regression.

Sign convention for the moving-average part: ``z(t) = mu + sum a_i z(t-i) +
e(t) + sum b_j e(t-j)``, where ``z`` is the ``d``-times differenced series.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DegenerateRegressionError, DimensionError, InsufficientDataError, SingularSystemError
from .kernel import solve_spd
from .scaling import IDENTITY

log = logging.getLogger(__name__)


def difference(series, d):
    x = np.asarray(series, dtype=np.float64)
    if d < 0:
        raise ValueError("differencing order must be >= 0")
    if x.size <= d:
        raise InsufficientDataError(f"need more than {d} values to difference {d} times")
    return np.diff(x, n=d) if d else x.copy()


def undifference(diffs, seeds):
    """Integrate ``d``-th differences back to levels.

    ``seeds`` are the ``d`` original values immediately preceding the first
    reconstructed value; returns the ``len(diffs)`` continuation values, so
    ``undifference(difference(s, d), s[:d])`` equals ``s[d:]``.
    """
    cur = np.asarray(diffs, dtype=np.float64)
    seeds = np.asarray(seeds, dtype=np.float64)
    d = seeds.size
    for level in range(d - 1, -1, -1):
        anchor = np.diff(seeds, n=level)[-1]
        cur = anchor + np.cumsum(cur)
    return cur


def _least_squares(design, target):
    # Normal equations with unit-norm columns; rescaling keeps the Cholesky well conditioned.
    norms = np.linalg.norm(design, axis=0)
    if np.any(norms == 0):
        raise DegenerateRegressionError("design matrix has an all-zero column")
    scaled = design / norms
    try:
        coef = solve_spd(scaled.T @ scaled, scaled.T @ target)
    except SingularSystemError as exc:
        raise DegenerateRegressionError(f"rank-deficient regression: {exc}") from exc
    return coef / norms


def _lag_matrix(x, p, start):
    """Rows ``t = start .. n-1`` of ``[x(t-1), .., x(t-p)]``."""
    if p == 0:
        return np.empty((x.size - start, 0))
    lags = sliding_window_view(x[:-1], p)[:, ::-1]   # row k holds x(k+p-1) .. x(k)
    return lags[start - p:]


@dataclass
class ArFit:
    c: float
    alpha: np.ndarray
    residuals: np.ndarray = field(default=None, repr=False)

    @property
    def p(self):
        return self.alpha.size

    @property
    def sigma2(self):
        return float(np.mean(self.residuals**2)) if self.residuals is not None else float("nan")


def fit_ar_ols(series, p):
    """Least-squares AR(p) with intercept over every ``t`` that has ``p`` lags."""
    x = np.asarray(series, dtype=np.float64)
    if p < 1:
        raise ValueError("AR order must be >= 1")
    if x.size < 2 * p + 2:
        raise InsufficientDataError(f"AR({p}) needs at least {2 * p + 2} values, got {x.size}")
    design = np.hstack([np.ones((x.size - p, 1)), _lag_matrix(x, p, p)])
    target = x[p:]
    coef = _least_squares(design, target)
    return ArFit(float(coef[0]), coef[1:].copy(), target - design @ coef)


def forecast_ar(fit, recent):
    """``c + sum alpha_i * recent_i`` with ``recent`` ordered most recent first."""
    recent = np.asarray(recent, dtype=np.float64)
    if recent.shape != (fit.p,):
        raise DimensionError(f"need exactly {fit.p} recent values, got {recent.size}")
    return float(fit.c + fit.alpha @ recent)


@dataclass(frozen=True)
class ArimaSpec:
    p: int
    d: int
    q: int

    def __post_init__(self):
        if min(self.p, self.d, self.q) < 0:
            raise ValueError("ARIMA orders must be >= 0")
        if self.d == 0 and self.p + self.q < 1:
            raise ValueError("ARIMA(0, 0, 0) has nothing to fit")


@dataclass
class ArimaFit:
    mu: float                 # intercept on the differenced scale
    alpha: np.ndarray
    beta: np.ndarray
    residuals: np.ndarray = field(repr=False)
    d: int = 0

    @property
    def p(self):
        return self.alpha.size

    @property
    def q(self):
        return self.beta.size


def _innovations(mu, alpha, beta, z):
    p, q = alpha.size, beta.size
    a = np.zeros(z.size)
    for t in range(p, z.size):
        ar = alpha @ z[t - p:t][::-1] if p else 0.0
        ma = 0.0
        for j in range(1, min(q, t) + 1):
            ma += beta[j - 1] * a[t - j]
        a[t] = z[t] - mu - ar - ma
    return a


def fit_arima(series, spec):
    z = difference(series, spec.d)
    p, q = spec.p, spec.q
    n = z.size
    if n < 2 * (p + q) + 20:
        raise InsufficientDataError(
            f"ARIMA{(p, spec.d, q)} needs at least {2 * (p + q) + 20} differenced values, got {n}"
        )
    if q == 0:
        design = np.hstack([np.ones((n - p, 1)), _lag_matrix(z, p, p)])
        coef = _least_squares(design, z[p:])
        mu, alpha, beta = float(coef[0]), coef[1:1 + p].copy(), np.empty(0)
    else:
        # stage 1: long autoregression supplies innovation estimates
        m = max(min(20, n // 4), p, q, 1)
        long_fit = fit_ar_ols(z, m)
        ehat = np.full(n, np.nan)
        ehat[m:] = long_fit.residuals
        # stage 2: regress on lagged values and lagged innovation estimates
        start = max(m + q, p)
        rows = n - start
        cols = [np.ones((rows, 1)), _lag_matrix(z, p, start)]
        cols.append(np.column_stack([ehat[start - j:n - j] for j in range(1, q + 1)]))
        coef = _least_squares(np.hstack(cols), z[start:])
        mu, alpha, beta = float(coef[0]), coef[1:1 + p].copy(), coef[1 + p:].copy()
    return ArimaFit(mu, alpha, beta, _innovations(mu, alpha, beta, z), spec.d)


def forecast_arima(fit, series):
    """One-step forecast on the level scale for the value following ``series``."""
    x = np.asarray(series, dtype=np.float64)
    z = difference(x, fit.d)
    if z.size < max(fit.p, 1):
        raise InsufficientDataError("not enough history for the AR lags")
    a = _innovations(fit.mu, fit.alpha, fit.beta, z)
    nxt = fit.mu
    if fit.p:
        nxt += fit.alpha @ z[-fit.p:][::-1]
    if fit.q:
        nxt += fit.beta @ a[-fit.q:][::-1]
    if fit.d == 0:
        return float(nxt)
    return float(undifference([nxt], x[-fit.d:])[0])


class _RefittingMethod:
    """Shared rolling behaviour: refit on ``window + [label]``, fall back to last value."""

    uses_scaling = False
    retrain_on_first = True

    def __init__(self, refit=True):
        self.refit = refit
        self.fit = None
        self.fallback = False
        self.fallback_count = 0

    def start(self, observed, scaler=IDENTITY):
        pass

    def retrain(self, window, label):
        if self.fit is not None and not self.refit and not self.fallback:
            return
        data = np.append(np.asarray(window, dtype=np.float64), label)
        try:
            self.fit = self._fit(data)
            self.fallback = False
        except (DegenerateRegressionError, InsufficientDataError) as exc:
            log.warning("%s fit failed (%s); using last-value forecast", self.name, exc)
            self.fit = None
            self.fallback = True
            self.fallback_count += 1

    def predict(self, window):
        if self.fallback or self.fit is None:
            return float(window[-1])
        return self._forecast(np.asarray(window, dtype=np.float64))


class ArMethod(_RefittingMethod):
    name = "ar"

    def __init__(self, p, refit=True):
        super().__init__(refit)
        self.p = p

    def _fit(self, data):
        return fit_ar_ols(data, self.p)

    def _forecast(self, window):
        return forecast_ar(self.fit, window[-self.p:][::-1])


class ArimaMethod(_RefittingMethod):
    name = "arima"

    def __init__(self, p, d, q, refit=True):
        super().__init__(refit)
        self.spec = ArimaSpec(p, d, q)

    def _fit(self, data):
        return fit_arima(data, self.spec)

    def _forecast(self, window):
        return forecast_arima(self.fit, window)
