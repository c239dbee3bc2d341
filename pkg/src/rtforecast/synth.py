"""Seeded synthetic series for experiments and tests."""

import numpy as np

from .harness import TimeSeries
from .kernel import SeededRng

KINDS = ("sine", "ar", "arma", "random_walk")


def sine(points, period=50.0, level=2.0, amplitude=1.0, noise=0.0, seed=0):
    """``level + amplitude * sin(2 pi t / period)`` for ``t = 1 .. points``."""
    t = np.arange(1, points + 1)
    x = level + amplitude * np.sin(2 * np.pi * t / period)
    if noise:
        x = x + SeededRng(seed).normal(0.0, noise, points)
    return TimeSeries(f"sine-p{period:g}", list(range(1, points + 1)), x)


def ar(points, alpha=(0.5, -0.25), sigma=0.1, c=0.0, seed=0, burn=200):
    alpha = np.asarray(alpha, dtype=np.float64)
    p = alpha.size
    rng = SeededRng(seed)
    eps = rng.normal(0.0, sigma, points + burn)
    x = np.zeros(points + burn)
    for t in range(p, x.size):
        x[t] = c + alpha @ x[t - p:t][::-1] + eps[t]
    return TimeSeries(f"ar{p}", list(range(1, points + 1)), x[burn:])


def arma(points, alpha=0.6, beta=0.3, sigma=1.0, seed=0, burn=200):
    """ARMA(1,1): ``x(t) = alpha x(t-1) + e(t) + beta e(t-1)``."""
    rng = SeededRng(seed)
    eps = rng.normal(0.0, sigma, points + burn)
    x = np.zeros(points + burn)
    for t in range(1, x.size):
        x[t] = alpha * x[t - 1] + eps[t] + beta * eps[t - 1]
    return TimeSeries("arma11", list(range(1, points + 1)), x[burn:])


def random_walk(points, start=100.0, sigma=1.0, seed=0):
    steps = SeededRng(seed).normal(0.0, sigma, points)
    steps[0] = 0.0
    return TimeSeries("random-walk", list(range(1, points + 1)), start + np.cumsum(steps))


def generate(kind, points, seed=0, **params):
    makers = {"sine": sine, "ar": ar, "arma": arma, "random_walk": random_walk}
    if kind not in makers:
        raise ValueError(f"unknown synthetic series {kind!r}; choose from {KINDS}")
    return makers[kind](points, seed=seed, **params)
