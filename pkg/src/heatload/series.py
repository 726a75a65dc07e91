"""Time-series containers, resampling, accumulation and differencing.

Timestamps are integer seconds since the Unix epoch (UTC) throughout.
"""
from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

HOUR = 3600


class SeriesError(ValueError):
    """Raised when a series violates its invariants or an operation's preconditions."""


class Unit(str, enum.Enum):
    KWH_ACCUMULATED = "kWh_accumulated"
    KWH_PER_STEP = "kWh_per_step"
    DEG_C = "degC"


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class RawSeries:
    """Unevenly spaced measurements, e.g. meter readings as transmitted."""

    times: np.ndarray
    values: np.ndarray
    unit: Unit = Unit.KWH_ACCUMULATED

    def __post_init__(self):
        times = _frozen_array(self.times, dtype=np.int64)
        values = _frozen_array(self.values)
        if times.ndim != 1 or times.shape != values.shape:
            raise SeriesError("times and values must be 1-d arrays of equal length")
        if np.any(np.diff(times) <= 0):
            raise SeriesError("timestamps must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise SeriesError("values must be finite")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "unit", Unit(self.unit))

    def __len__(self) -> int:
        return len(self.times)


@dataclass(frozen=True)
class RegularSeries:
    """Evenly spaced, gap-free series starting at ``start`` with spacing ``step`` seconds."""

    start: int
    values: np.ndarray
    step: int = HOUR
    unit: Unit = Unit.KWH_PER_STEP

    def __post_init__(self):
        values = _frozen_array(self.values)
        if values.ndim != 1:
            raise SeriesError("values must be 1-d")
        if self.step <= 0:
            raise SeriesError("step must be positive")
        if not np.all(np.isfinite(values)):
            raise SeriesError("values must be finite")
        unit = Unit(self.unit)
        if unit is Unit.KWH_ACCUMULATED and np.any(np.diff(values) < 0):
            raise SeriesError("accumulated series must be non-decreasing (counter reset?)")
        object.__setattr__(self, "start", int(self.start))
        object.__setattr__(self, "step", int(self.step))
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "unit", unit)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def times(self) -> np.ndarray:
        return self.start + self.step * np.arange(len(self.values), dtype=np.int64)

    @property
    def end(self) -> int:
        """Timestamp of the last sample."""
        return self.start + self.step * (len(self.values) - 1)

    def slice(self, i: int, j: int) -> "RegularSeries":
        """Sub-series of samples ``i`` (inclusive) to ``j`` (exclusive)."""
        n = len(self.values)
        i, j, _ = slice(i, j).indices(n)
        return RegularSeries(self.start + i * self.step, self.values[i:j], self.step, self.unit)

    def aligned_with(self, other: "RegularSeries") -> bool:
        return (
            self.start == other.start
            and self.step == other.step
            and len(self) == len(other)
        )


def resample(raw: RawSeries, start: int, step: int, n: int) -> RegularSeries:
    """Piecewise-linear interpolation of ``raw`` onto ``n`` grid instants.

    Grid instants that coincide with a raw timestamp return the raw value
    unchanged. The grid must lie inside the span of the raw data.
    """
    if len(raw) < 2:
        raise SeriesError("resampling needs at least 2 raw points")
    if n < 1 or step <= 0:
        raise SeriesError("grid needs n >= 1 and step > 0")
    grid = int(start) + int(step) * np.arange(n, dtype=np.int64)
    t, v = raw.times, raw.values
    if grid[0] < t[0] or grid[-1] > t[-1]:
        raise SeriesError(
            f"grid [{grid[0]}, {grid[-1]}] outside data span [{t[0]}, {t[-1]}]"
        )
    # right neighbour index, so that t[k-1] <= g < t[k]
    k = np.searchsorted(t, grid, side="right")
    k = np.clip(k, 1, len(t) - 1)
    t0, t1 = t[k - 1], t[k]
    v0, v1 = v[k - 1], v[k]
    frac = (grid - t0) / (t1 - t0)
    out = v0 + frac * (v1 - v0)
    exact = grid == t0
    out[exact] = v0[exact]
    hit_right = grid == t1
    out[hit_right] = v1[hit_right]
    return RegularSeries(int(start), out, int(step), raw.unit)


def accumulate(load: RegularSeries) -> RegularSeries:
    """Running sum of a per-step load series."""
    if np.any(load.values < 0):
        raise SeriesError("load values must be non-negative")
    return RegularSeries(load.start, np.cumsum(load.values), load.step, Unit.KWH_ACCUMULATED)


def differentiate_shift(acc: RegularSeries, tau: int = 0) -> RegularSeries:
    """First differences of an accumulated series, moved ``tau`` steps earlier.

    ``out[i] = acc[i + 1 + tau] - acc[i + tau]``, labelled with the timestamp of
    ``acc[i + 1]``. Output length is ``len(acc) - 1 - tau``.
    """
    if tau < 0:
        raise SeriesError("tau must be non-negative")
    if len(acc) < tau + 2:
        raise SeriesError(f"need at least {tau + 2} samples for tau={tau}, got {len(acc)}")
    d = np.diff(acc.values)
    return RegularSeries(acc.start + acc.step, d[tau:], acc.step, Unit.KWH_PER_STEP)


# -- CSV ------------------------------------------------------------------

def parse_timestamp(text: str) -> int:
    dt = datetime.fromisoformat(text.strip())
    if dt.tzinfo is None:
        raise SeriesError(f"timestamp without UTC offset: {text!r}")
    return int(dt.timestamp())


def format_timestamp(seconds: int) -> str:
    return datetime.fromtimestamp(int(seconds), tz=timezone.utc).isoformat()


def read_csv(path, unit: Unit = Unit.KWH_ACCUMULATED) -> RawSeries:
    """Read a ``timestamp,value`` CSV with header. Bad rows raise, they are never skipped."""
    path = Path(path)
    times, values = [], []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["timestamp", "value"]:
            raise SeriesError(f"{path}: expected header 'timestamp,value', got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise SeriesError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
            try:
                times.append(parse_timestamp(row[0]))
                values.append(float(row[1]))
            except ValueError as exc:
                raise SeriesError(f"{path}:{lineno}: {exc}") from None
    return RawSeries(np.array(times, dtype=np.int64), np.array(values), unit)


def write_csv(path, times, values) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["timestamp", "value"])
        for t, v in zip(times, values):
            writer.writerow([format_timestamp(t), repr(float(v))])


def to_regular(raw: RawSeries, step: int = HOUR) -> RegularSeries:
    """Resample onto the largest step-aligned grid that fits inside the raw span."""
    first = -(-int(raw.times[0]) // step) * step
    last = (int(raw.times[-1]) // step) * step
    if last < first + step:
        raise SeriesError("raw data spans less than two grid steps")
    n = (last - first) // step + 1
    return resample(raw, first, step, n)
