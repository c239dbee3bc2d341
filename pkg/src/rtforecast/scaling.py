"""Min-max scaling fitted once on the observed training values."""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateScaleError


@dataclass(frozen=True)
class MinMaxScaler:
    lo: float = 0.0
    hi: float = 1.0

    @property
    def span(self):
        return self.hi - self.lo

    @property
    def is_identity(self):
        return self.lo == 0.0 and self.hi == 1.0

    def transform(self, values):
        return (np.asarray(values, dtype=np.float64) - self.lo) / self.span

    def inverse(self, values):
        if np.isscalar(values):
            return float(values) * self.span + self.lo
        return np.asarray(values, dtype=np.float64) * self.span + self.lo


IDENTITY = MinMaxScaler()


def min_max_scale(values):
    """Fit a scaler mapping ``[min, max]`` of ``values`` onto ``[0, 1]``.

    Values outside the fitted range extrapolate linearly; nothing is clipped.
    """
    v = np.asarray(values, dtype=np.float64)
    lo, hi = float(v.min()), float(v.max())
    if not hi > lo:
        raise DegenerateScaleError("cannot min-max scale a constant window")
    scaler = MinMaxScaler(lo, hi)
    return scaler, scaler.transform(v)


def inverse_scale(scaler, v):
    return scaler.inverse(v)
