"""Windowing, PSO-tuned training, 24-hour forecasting and error metrics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Callable, Sequence

import numpy as np

from . import baseline
from .ksvr import Hyperparams, Scaler, SvrError, SvrModel, train
from .pso import PsoConfig, PsoResult, optimize
from .series import HOUR, RegularSeries, SeriesError, Unit, differentiate_shift, format_timestamp

MODES = ("recursive", "open_loop")
DEFAULT_TAU = {"recursive": 0, "open_loop": 1}


class PipelineError(ValueError):
    pass


@dataclass(frozen=True)
class WindowSpec:
    window_days: int = 16
    split: tuple = (14, 1, 1)
    step: int = HOUR
    horizon: int = 24

    def __post_init__(self):
        split = tuple(int(s) for s in self.split)
        object.__setattr__(self, "split", split)
        if len(split) != 3 or min(split) < 1:
            raise PipelineError(f"split must be three positive day counts, got {split}")
        if sum(split) != self.window_days:
            raise PipelineError(f"split {split} does not add up to {self.window_days} days")
        if self.step <= 0 or 86400 % self.step:
            raise PipelineError("step must divide one day")
        if not 1 <= self.horizon <= split[2] * self.steps_per_day:
            raise PipelineError("horizon must fit inside the test days")

    @property
    def steps_per_day(self) -> int:
        return 86400 // self.step

    @property
    def n_steps(self) -> int:
        return self.window_days * self.steps_per_day

    @property
    def row_counts(self) -> tuple[int, int, int]:
        return tuple(d * self.steps_per_day for d in self.split)


@dataclass(frozen=True)
class Rows:
    """Feature rows (h[t-1], theta[t-1]) -> h[t], in original units."""

    X: np.ndarray
    y: np.ndarray

    def __len__(self):
        return len(self.y)

    def __add__(self, other: "Rows") -> "Rows":
        return Rows(np.vstack([self.X, other.X]), np.r_[self.y, other.y])


@dataclass(frozen=True)
class Window:
    """One window of aligned data.

    ``accumulated`` and ``temperature`` cover ``n_steps + 1`` points; row t
    predicts ``accumulated[t]`` from index ``t - 1``.
    """

    index: int
    spec: WindowSpec
    accumulated: RegularSeries
    temperature: RegularSeries
    train: Rows
    val: Rows
    test: Rows

    @property
    def n_fit(self) -> int:
        """Rows before the test block, i.e. the index of the last known value."""
        return len(self.train) + len(self.val)

    @property
    def last_known(self) -> float:
        return float(self.accumulated.values[self.n_fit])

    @property
    def test_start(self) -> int:
        return self.accumulated.start + (self.n_fit + 1) * self.spec.step

    def actual_load(self) -> RegularSeries:
        """True per-step load over the horizon (differences of the counter)."""
        i = self.n_fit
        return differentiate_shift(self.accumulated.slice(i, i + self.spec.horizon + 1), 0)

    def history_load(self) -> RegularSeries:
        """Per-step load over the train and validation rows."""
        return differentiate_shift(self.accumulated.slice(0, self.n_fit + 1), 0)


def feature_rows(accumulated: np.ndarray, temperature: np.ndarray, lo: int, hi: int) -> Rows:
    """Rows for targets accumulated[lo:hi]."""
    X = np.column_stack([accumulated[lo - 1: hi - 1], temperature[lo - 1: hi - 1]])
    return Rows(X, accumulated[lo:hi].copy())


def make_windows(consumption: RegularSeries, temperature: RegularSeries,
                 spec: WindowSpec = WindowSpec()) -> list[Window]:
    """Non-overlapping consecutive windows; an empty list if none fits."""
    if consumption.unit is not Unit.KWH_ACCUMULATED:
        raise SeriesError("consumption must be an accumulated series")
    if temperature.unit is not Unit.DEG_C:
        raise SeriesError("temperature must be in degC")
    if not consumption.aligned_with(temperature):
        raise SeriesError("consumption and temperature are not aligned")
    if consumption.step != spec.step:
        raise SeriesError(f"series step {consumption.step} s differs from window step {spec.step} s")
    if len(consumption) < 2:
        raise SeriesError("need at least two samples")
    n = spec.n_steps
    ntr, nval, _ = spec.row_counts
    windows = []
    for w in range((len(consumption) - 1) // n):
        o = w * n
        acc = consumption.slice(o, o + n + 1)
        temp = temperature.slice(o, o + n + 1)
        h, th = acc.values, temp.values
        windows.append(Window(
            index=w,
            spec=spec,
            accumulated=acc,
            temperature=temp,
            train=feature_rows(h, th, 1, 1 + ntr),
            val=feature_rows(h, th, 1 + ntr, 1 + ntr + nval),
            test=feature_rows(h, th, 1 + ntr + nval, n + 1),
        ))
    return windows


# -- tuning ---------------------------------------------------------------

@dataclass(frozen=True)
class TuneConfig:
    pso: PsoConfig = PsoConfig()
    svr_tol: float = 1e-3
    tune_passes: int = 10000      # update cap per fitness evaluation
    final_passes: int | None = None  # None: the solver default, 10 m^2

    def __post_init__(self):
        if self.svr_tol <= 0:
            raise PipelineError("svr_tol must be positive")
        if self.tune_passes < 1:
            raise PipelineError("tune_passes must be >= 1")


def _scalers(rows: Rows) -> tuple[Scaler, Scaler]:
    return Scaler.fit(rows.X), Scaler.fit(rows.y[:, None])


def make_fitness(train_rows: Rows, val_rows: Rows, svr_tol: float = 1e-3,
                 max_passes: int | None = None) -> Callable[[np.ndarray], float]:
    """Validation MSE of one-step accumulated predictions for a (C, gamma, eps) triple."""
    if len(train_rows) < 2 or len(val_rows) < 1:
        raise PipelineError("need at least two training rows and one validation row")
    fs, ts = _scalers(train_rows)

    def fitness(position) -> float:
        try:
            hyper = Hyperparams(*map(float, position))
            model = train(train_rows.X, train_rows.y, hyper, tol=svr_tol, max_passes=max_passes,
                          feature_scaler=fs, target_scaler=ts)
        except SvrError:
            return math.inf
        err = model.predict(val_rows.X) - val_rows.y
        return float(np.mean(err * err))

    return fitness


def tune_and_train(train_rows: Rows, val_rows: Rows, config: TuneConfig = TuneConfig(),
                   map_fn: Callable | None = None) -> tuple[SvrModel, PsoResult]:
    """PSO over (C, gamma, eps), then a refit on train and validation rows together."""
    fitness = make_fitness(train_rows, val_rows, config.svr_tol, config.tune_passes)
    result = optimize(fitness, config.pso, map_fn=map_fn)
    hyper = Hyperparams(*map(float, result.best_position))
    rows = train_rows + val_rows
    fs, ts = _scalers(rows)
    model = train(rows.X, rows.y, hyper, tol=config.svr_tol, max_passes=config.final_passes,
                  feature_scaler=fs, target_scaler=ts)
    return model, result


# -- forecasting ----------------------------------------------------------

def monotone(values: np.ndarray, floor: float = -np.inf) -> np.ndarray:
    """Running maximum, starting no lower than ``floor``."""
    return np.maximum.accumulate(np.r_[floor, np.asarray(values, dtype=float)])[1:]


def forecast_24h(model: SvrModel, last_known: float, temperature, mode: str = "recursive",
                 true_lags=None, start: int = 0, step: int = HOUR) -> RegularSeries:
    """Accumulated forecasts for the steps following ``last_known``.

    ``temperature[k]`` is the lagged temperature feature of step k, i.e. the
    reading one step before the predicted instant. In ``recursive`` mode each
    prediction is fed back as the next lagged counter value; ``open_loop``
    takes the true lagged values from ``true_lags`` instead. The result is
    clamped to be non-decreasing and never below ``last_known``.
    """
    theta = temperature.values if isinstance(temperature, RegularSeries) else np.asarray(temperature, dtype=float)
    if mode not in MODES:
        raise PipelineError(f"unknown mode {mode!r}; expected one of {MODES}")
    n = len(theta)
    if mode == "open_loop":
        if true_lags is None:
            raise PipelineError("open_loop mode needs the true lagged consumption")
        lags = np.asarray(true_lags, dtype=float)
        if len(lags) != n:
            raise PipelineError("true_lags and temperature lengths differ")
        out = model.predict(np.column_stack([lags, theta]))
    else:
        out = np.empty(n)
        prev = float(last_known)
        for k in range(n):
            prev = float(model.predict(np.array([prev, theta[k]])))
            out[k] = prev
    return RegularSeries(start, monotone(out, float(last_known)), step, Unit.KWH_ACCUMULATED)


# -- metrics --------------------------------------------------------------

def _pair(predicted, actual) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(predicted, RegularSeries) and isinstance(actual, RegularSeries):
        if not predicted.aligned_with(actual):
            raise SeriesError("predicted and actual series are not aligned")
    p = predicted.values if isinstance(predicted, RegularSeries) else np.asarray(predicted, dtype=float)
    a = actual.values if isinstance(actual, RegularSeries) else np.asarray(actual, dtype=float)
    if p.shape != a.shape:
        raise SeriesError(f"length mismatch {p.shape} vs {a.shape}")
    if len(a) == 0:
        raise SeriesError("empty series")
    return p, a


def rmse(predicted, actual) -> float:
    p, a = _pair(predicted, actual)
    return float(np.sqrt(np.mean((p - a) ** 2)))


def mape(predicted, actual, zero_policy: str = "error") -> tuple[float, float]:
    """Mean absolute percentage error and the offset added to both series.

    With ``dynamic_range_offset``, ground truth containing values <= 0 shifts
    both series up by max(actual) - min(actual) before dividing.
    """
    p, a = _pair(predicted, actual)
    offset = 0.0
    if np.any(a <= 0):
        if zero_policy == "error":
            raise PipelineError("MAPE undefined: ground truth has values <= 0")
        if zero_policy != "dynamic_range_offset":
            raise PipelineError(f"unknown zero policy {zero_policy!r}")
        offset = float(a.max() - a.min())
        if np.any(a + offset <= 0):
            raise PipelineError("MAPE undefined even after the dynamic-range offset")
        p, a = p + offset, a + offset
    return float(100.0 * np.mean(np.abs(p - a) / a)), offset


# -- reports --------------------------------------------------------------

@dataclass(frozen=True)
class ForecastReport:
    predicted_load: RegularSeries
    actual_load: RegularSeries
    predicted_accumulated: RegularSeries
    rmse: float
    mape_percent: float
    mape_offset_used: float
    hyper: Hyperparams
    converged: bool
    mode: str = "recursive"
    tau: int = 0
    window: int = 0

    def __post_init__(self):
        if not self.predicted_load.aligned_with(self.actual_load):
            raise SeriesError("predicted and actual load are not aligned")

    def as_dict(self) -> dict:
        return {
            "window": self.window,
            "mode": self.mode,
            "tau": self.tau,
            "start": format_timestamp(self.actual_load.start),
            "step": self.actual_load.step,
            "hyper": self.hyper.as_dict(),
            "converged": self.converged,
            "rmse": self.rmse,
            "mape_percent": self.mape_percent,
            "mape_offset_used": self.mape_offset_used,
            "predicted_load": self.predicted_load.values.tolist(),
            "actual_load": self.actual_load.values.tolist(),
            "predicted_accumulated": self.predicted_accumulated.values.tolist(),
        }

    def plot_data(self) -> str:
        """Three columns: timestamp, actual kWh, predicted kWh."""
        lines = ["# timestamp actual_kWh predicted_kWh"]
        for t, a, p in zip(self.actual_load.times, self.actual_load.values, self.predicted_load.values):
            lines.append(f"{format_timestamp(t)} {float(a)!r} {float(p)!r}")
        return "\n".join(lines) + "\n"


def forecast_window(model: SvrModel, window: Window, mode: str = "recursive", tau: int | None = None,
                    zero_policy: str = "dynamic_range_offset") -> ForecastReport:
    """Forecast the test block of ``window`` and score the derived load."""
    if mode not in MODES:
        raise PipelineError(f"unknown mode {mode!r}; expected one of {MODES}")
    tau = DEFAULT_TAU[mode] if tau is None else int(tau)
    if tau < 0:
        raise PipelineError("tau must be non-negative")
    i = window.n_fit
    n = window.spec.horizon + tau
    h, th = window.accumulated.values, window.temperature.values
    if i + n > len(h):
        raise PipelineError(f"tau={tau} reaches past the end of the window")
    step = window.spec.step
    pred = forecast_24h(model, window.last_known, th[i: i + n], mode,
                        true_lags=h[i: i + n] if mode == "open_loop" else None,
                        start=window.test_start, step=step)
    prefixed = RegularSeries(pred.start - step, np.r_[window.last_known, pred.values], step,
                             Unit.KWH_ACCUMULATED)
    load = differentiate_shift(prefixed, tau)
    actual = window.actual_load()
    m, off = mape(load, actual, zero_policy)
    return ForecastReport(load, actual, pred, rmse(load, actual), m, off, model.hyper,
                          model.converged, mode, tau, window.index)


# -- aggregation ----------------------------------------------------------

def mean_std(values: Sequence[float]) -> dict:
    """Mean and sample standard deviation; the latter is None for one value."""
    v = np.asarray(values, dtype=float)
    return {
        "n": int(len(v)),
        "mean": float(v.mean()) if len(v) else None,
        "std": float(v.std(ddof=1)) if len(v) > 1 else None,
    }


def summarize(reports: Sequence[ForecastReport]) -> dict:
    return {
        "rmse": mean_std([r.rmse for r in reports]),
        "mape_percent": mean_std([r.mape_percent for r in reports]),
    }


@dataclass(frozen=True)
class BaselineResult:
    method: str
    window: int
    predicted_load: RegularSeries
    rmse: float
    mape_percent: float
    detail: dict = field(default_factory=dict)


def run_baselines(window: Window, max_p: int = 3, max_q: int = 3,
                  zero_policy: str = "dynamic_range_offset") -> list[BaselineResult]:
    """ARIMA (AIC-selected order) and seasonal naive on the window's load history."""
    history = window.history_load()
    actual = window.actual_load()
    horizon = window.spec.horizon
    out = []
    try:
        order = baseline.select_order(history, max_p, max_q)
        model = baseline.fit_arima(history, order)
        pred = baseline.forecast_arima(model, history, horizon)
        detail = {"order": [order.p, order.d, order.q]}
    except baseline.ArimaError as exc:
        # fall back to the mean so the comparison table stays complete
        pred = RegularSeries(actual.start, np.full(horizon, history.values.mean()), actual.step, Unit.KWH_PER_STEP)
        detail = {"order": None, "error": str(exc)}
    out.append(BaselineResult("arima", window.index, pred, rmse(pred, actual),
                              mape(pred, actual, zero_policy)[0], detail))
    naive = baseline.seasonal_naive(history, horizon, window.spec.steps_per_day)
    out.append(BaselineResult("seasonal_naive", window.index, naive, rmse(naive, actual),
                              mape(naive, actual, zero_policy)[0], {}))
    return out


def month_of(seconds: int) -> str:
    return datetime.fromtimestamp(int(seconds), tz=timezone.utc).strftime("%Y-%m")


def comparison_table(rows: Sequence[dict], methods: Sequence[str]) -> list[dict]:
    """Group per-window scores by month of the test block.

    Each input row is ``{"month": ..., "method": ..., "rmse": ..., "mape_percent": ...}``.
    The winner of a month is the method with the lowest mean MAPE.
    """
    months = sorted({r["month"] for r in rows})
    table = []
    for month in months:
        entry = {"month": month}
        for method in methods:
            sel = [r for r in rows if r["month"] == month and r["method"] == method]
            entry[method] = {
                "mape_percent": mean_std([r["mape_percent"] for r in sel]),
                "rmse": mean_std([r["rmse"] for r in sel]),
            }
        scored = [(entry[m]["mape_percent"]["mean"], k, m) for k, m in enumerate(methods)
                  if entry[m]["mape_percent"]["mean"] is not None]
        entry["winner"] = min(scored)[2] if scored else None
        table.append(entry)
    return table


def markdown_table(table: Sequence[dict], methods: Sequence[str]) -> str:
    def cell(stats):
        s = stats["mean"]
        if s is None:
            return "n/a"
        sd = stats["std"]
        return f"{s:.3f}" + (f" ± {sd:.3f}" if sd is not None else "")

    head = "| month | " + " | ".join(f"{m} MAPE % | {m} RMSE" for m in methods) + " | winner |"
    sep = "|" + "---|" * (2 * len(methods) + 2)
    lines = [head, sep]
    for row in table:
        cells = []
        for m in methods:
            mark = "**" if row["winner"] == m else ""
            cells.append(f"{mark}{cell(row[m]['mape_percent'])}{mark}")
            cells.append(cell(row[m]["rmse"]))
        lines.append(f"| {row['month']} | " + " | ".join(cells) + f" | {row['winner']} |")
    return "\n".join(lines) + "\n"
