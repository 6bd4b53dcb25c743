"""Time-indexed regression data, CSV ingestion and window planning."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DataError

SCHEMES = ("contiguous", "equally_spaced")


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TimeSeries:
    """Ordered (X_t, y_t) observations.

    ``x`` has one row per time step (n x p), ``y`` the matching responses.
    ``t0`` is the time index of the first row (1-based by default). Values
    are immutable after construction.
    """

    x: np.ndarray
    y: np.ndarray
    t0: int = 1

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 2:
            raise DataError(f"x must be 2-d (n x p), got shape {x.shape}")
        if y.ndim != 1:
            raise DataError(f"y must be 1-d, got shape {y.shape}")
        if x.shape[0] != y.shape[0]:
            raise DataError(
                f"x and y lengths disagree: {x.shape[0]} vs {y.shape[0]}"
            )
        if x.shape[0] < 1 or x.shape[1] < 1:
            raise DataError(f"need n >= 1 and p >= 1, got shape {x.shape}")
        if not np.all(np.isfinite(x)) or not np.all(np.isfinite(y)):
            raise DataError("non-finite entries in time series")
        object.__setattr__(self, "x", _readonly(x))
        object.__setattr__(self, "y", _readonly(y))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def window(self, start: int, end: int) -> "TimeSeries":
        """Sub-series over the half-open row range [start, end)."""
        if not (0 <= start < end <= self.n):
            raise DataError(f"window [{start}, {end}) out of range [0, {self.n})")
        return TimeSeries(self.x[start:end], self.y[start:end], t0=self.t0 + start)

    def take(self, rows) -> "TimeSeries":
        """Sub-series from a row index array (keeps original order)."""
        rows = np.asarray(rows, dtype=int)
        return TimeSeries(self.x[rows], self.y[rows], t0=self.t0)


@dataclass(frozen=True)
class WindowPlan:
    """A list of half-open row ranges used for per-window estimation."""

    windows: tuple
    scheme: str
    k: int
    w: int

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise DataError(f"unknown scheme {self.scheme!r}")
        wins = tuple((int(s), int(e)) for s, e in self.windows)
        prev = -1
        for s, e in wins:
            if s < 0 or e <= s:
                raise DataError(f"invalid window ({s}, {e})")
            if s < prev:
                raise DataError("windows must be ordered by start")
            prev = s
        object.__setattr__(self, "windows", wins)

    def to_json(self) -> dict:
        return {
            "scheme": self.scheme,
            "K": self.k,
            "w": self.w,
            "windows": [list(win) for win in self.windows],
        }

    @classmethod
    def from_json(cls, data: dict) -> "WindowPlan":
        return cls(
            windows=tuple(tuple(win) for win in data["windows"]),
            scheme=data["scheme"],
            k=int(data["K"]),
            w=int(data["w"]),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def make_windows(n: int, k: int, w: int | None = None, scheme: str = "contiguous") -> WindowPlan:
    """Build a window plan over a series of length ``n``.

    ``contiguous`` produces ``k`` disjoint back-to-back windows of length
    floor(n / k) (trailing remainder rows are dropped); ``w`` may be omitted
    and must equal floor(n / k) if given. ``equally_spaced`` produces ``k``
    windows of length ``w`` whose starts are evenly spread over [0, n - w]
    (overlap permitted).
    """
    if scheme not in SCHEMES:
        raise DataError(f"unknown scheme {scheme!r}")
    if k < 1:
        raise DataError(f"need k >= 1, got {k}")
    if n < 1:
        raise DataError(f"need n >= 1, got {n}")
    if scheme == "contiguous":
        expected = n // k
        if expected < 1:
            raise DataError(f"k={k} windows do not fit in n={n} rows")
        if w is None:
            w = expected
        if w != expected:
            raise DataError(
                f"contiguous scheme requires w = floor(n/k) = {expected}, got w={w}"
            )
        if k * w > n:
            raise DataError(f"k*w = {k * w} exceeds n = {n}")
        windows = tuple((i * w, (i + 1) * w) for i in range(k))
    else:
        if w is None:
            raise DataError("equally_spaced scheme requires a window length w")
        if w < 1:
            raise DataError(f"need w >= 1, got {w}")
        if w > n:
            raise DataError(f"window length w={w} exceeds series length n={n}")
        if k == 1:
            windows = ((0, w),)
        else:
            span = n - w
            starts = [math.floor(j * span / (k - 1)) for j in range(k)]
            windows = tuple((s, s + w) for s in starts)
    return WindowPlan(windows=windows, scheme=scheme, k=k, w=w)


def load_csv(path, x_columns, y_column) -> TimeSeries:
    """Read a comma-separated file (header row, '.' decimal separator).

    Rows are assumed ordered by time. Errors name the offending cell.
    """
    x_columns = list(x_columns)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"empty file: {path}") from None
        header = [h.strip() for h in header]
        missing = [c for c in x_columns + [y_column] if c not in header]
        if missing:
            raise DataError(f"missing column(s) {missing} in {path}")
        col_idx = {c: header.index(c) for c in x_columns + [y_column]}
        xs, ys = [], []
        for row_num, row in enumerate(reader, start=1):
            if not row or all(cell.strip() == "" for cell in row):
                continue
            if len(row) != len(header):
                raise DataError(
                    f"row {row_num} has {len(row)} fields, expected {len(header)}"
                )

            def cell(name):
                raw = row[col_idx[name]].strip()
                try:
                    value = float(raw)
                except ValueError:
                    raise DataError(
                        f"non-numeric value {raw!r} at row {row_num}, column {name!r}"
                    ) from None
                if not math.isfinite(value):
                    raise DataError(
                        f"non-finite value {raw!r} at row {row_num}, column {name!r}"
                    )
                return value

            xs.append([cell(c) for c in x_columns])
            ys.append(cell(y_column))
    if not ys:
        raise DataError(f"no data rows in {path}")
    return TimeSeries(np.asarray(xs), np.asarray(ys))


def write_csv(ts: TimeSeries, path, x_columns=None, y_column: str = "y") -> None:
    """Write a time series as CSV; float formatting round-trips exactly."""
    if x_columns is None:
        x_columns = [f"x{i + 1}" for i in range(ts.p)]
    if len(x_columns) != ts.p:
        raise DataError(f"expected {ts.p} covariate names, got {len(x_columns)}")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(x_columns) + [y_column])
        for row, resp in zip(ts.x, ts.y):
            writer.writerow([repr(float(v)) for v in row] + [repr(float(resp))])
