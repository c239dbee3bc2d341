"""CSV ingestion and atomic file output."""

import csv
import logging
import os
import tempfile
from dataclasses import dataclass, field
from datetime import datetime

import numpy as np

from .errors import DataError
from .harness import TimeSeries

log = logging.getLogger(__name__)


@dataclass
class Dataset:
    series: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.series[key]

    def __len__(self):
        return len(self.series)

    def first(self):
        return next(iter(self.series.values()))


def _parse_timestamps(raw, path):
    try:
        return [int(v) for v in raw]
    except ValueError:
        pass
    out = []
    for line, v in enumerate(raw, start=2):
        try:
            out.append(datetime.fromisoformat(v))
        except ValueError:
            raise DataError(f"{path}:{line}: timestamp {v!r} is neither an integer nor an ISO date") from None
    return out


def _resolve_column(header, column, path):
    if isinstance(column, int) or (isinstance(column, str) and column.isdigit()):
        idx = int(column)
        if not 0 <= idx < len(header):
            raise DataError(f"{path}: column index {idx} out of range (file has {len(header)} columns)")
        return idx
    if column not in header:
        raise DataError(f"{path}: no column named {column!r}; available: {header}")
    return header.index(column)


def load_csv(path, value_column, time_column=0):
    """Read one or more numeric columns keyed by a timestamp column.

    ``value_column`` may be a header name, a 0-based index, or a list of
    either. Blank or non-numeric values are rejected with their line
    numbers; duplicate timestamps are rejected; out-of-order rows are sorted
    with a warning.
    """
    if not os.path.exists(path):
        raise DataError(f"no such file: {path}")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: file is empty")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if any(cell.strip() for cell in r)]
    if not body:
        raise DataError(f"{path}: no data rows")

    columns = value_column if isinstance(value_column, (list, tuple)) else [value_column]
    t_idx = _resolve_column(header, time_column, path)
    stamps = _parse_timestamps([r[t_idx].strip() if t_idx < len(r) else "" for r in body], path)

    dataset = Dataset()
    for column in columns:
        v_idx = _resolve_column(header, column, path)
        values, bad = [], []
        for line, r in enumerate(body, start=2):
            cell = r[v_idx].strip() if v_idx < len(r) else ""
            try:
                value = float(cell)
                if not np.isfinite(value):
                    raise ValueError
            except ValueError:
                bad.append(f"line {line}: {cell!r}")
                continue
            values.append(value)
        if bad:
            raise DataError(f"{path}: unparseable values in column {header[v_idx]!r}: " + ", ".join(bad))

        order = sorted(range(len(stamps)), key=lambda k: stamps[k])
        if order != list(range(len(stamps))):
            log.warning("%s: rows are not in timestamp order; sorting", path)
        ts = [stamps[k] for k in order]
        dupes = sorted({str(a) for a, b in zip(ts, ts[1:]) if a == b})
        if dupes:
            raise DataError(f"{path}: duplicate timestamps: {', '.join(dupes)}")
        vals = np.array([values[k] for k in order])
        name = header[v_idx]
        dataset.series[name] = TimeSeries(name, ts, vals)
    return dataset


def atomic_write(path, text):
    """Write ``text`` to ``path`` via a temp file in the same directory plus rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def series_to_csv(series):
    lines = ["t,value"]
    for t, v in zip(series.timestamps, series.values):
        lines.append(f"{t},{float(v)!r}")
    return "\n".join(lines) + "\n"


def plot_csv(rows):
    def fmt(v):
        return "" if v is None else repr(float(v))

    lines = ["t,observed,predicted,abs_diff"]
    for t, obs, pred, diff in rows:
        lines.append(f"{t},{fmt(obs)},{fmt(pred)},{fmt(diff)}")
    return "\n".join(lines) + "\n"
