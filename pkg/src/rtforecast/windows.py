"""Index bookkeeping for the sliding input windows of the real-time scheme.

Indices are 1-based to match the usual ``x(1) .. x(T)`` notation. At
iteration ``t`` the window covers indices ``t .. T + t - 2`` (always ``T - 1``
entries) and the label is ``x(T + t - 1)``. Entries past ``T`` are model
predictions in ``prediction`` feedback mode and arrived observations in
``observation`` mode.
"""

from dataclasses import dataclass

import numpy as np

FEEDBACK_MODES = ("prediction", "observation")


@dataclass(frozen=True)
class Slot:
    index: int
    predicted: bool

    def __str__(self):
        return f"xhat({self.index})" if self.predicted else f"x({self.index})"


def window_slots(t, T, feedback="prediction"):
    if feedback not in FEEDBACK_MODES:
        raise ValueError(f"unknown feedback mode {feedback!r}")
    return [
        Slot(idx, feedback == "prediction" and idx > T)
        for idx in range(t, T + t - 1)
    ]


def label_index(t, T):
    return T + t - 1


def build_window(t, T, observed, predicted, feedback="prediction"):
    """Materialise window ``X(t)``.

    ``observed`` holds ``x(1), x(2), ...`` (0-based storage); ``predicted``
    maps 1-based index to prediction.
    """
    out = np.empty(T - 1)
    for k, slot in enumerate(window_slots(t, T, feedback)):
        out[k] = predicted[slot.index] if slot.predicted else observed[slot.index - 1]
    return out


def plan(T, N, feedback="prediction"):
    """Human-readable schedule: ``(t, window, label, forecast_window)`` per iteration."""
    rows = []
    for t in range(1, N + 2):
        rows.append((
            t,
            [str(s) for s in window_slots(t, T, feedback)],
            f"x({label_index(t, T)})",
            [str(s) for s in window_slots(t + 1, T, feedback)],
        ))
    return rows
