"""Correlograms and classical additive decomposition."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .series import RegularSeries, SeriesError, Unit


class AnalysisError(ValueError):
    pass


@dataclass(frozen=True)
class CorrelogramResult:
    lags: np.ndarray
    coefficients: np.ndarray
    confidence_band: float

    def as_dict(self) -> dict:
        return {
            "lags": self.lags.tolist(),
            "coefficients": self.coefficients.tolist(),
            "band": self.confidence_band,
        }


@dataclass(frozen=True)
class Decomposition:
    trend: RegularSeries
    seasonal: RegularSeries
    residual: RegularSeries


def _values(series) -> np.ndarray:
    if isinstance(series, RegularSeries):
        return series.values
    return np.asarray(series, dtype=float)


def _centered(x: np.ndarray, max_lag: int) -> np.ndarray:
    if max_lag < 0:
        raise AnalysisError("max_lag must be non-negative")
    if len(x) <= max_lag + 1:
        raise AnalysisError(f"series of length {len(x)} too short for max_lag={max_lag}")
    xc = x - x.mean()
    if not np.any(xc):
        raise AnalysisError("series is constant (zero variance)")
    return xc


def autocovariance(x, max_lag: int) -> np.ndarray:
    """Biased sample autocovariances c_0..c_max_lag (divisor N)."""
    xc = _centered(_values(x), max_lag)
    n = len(xc)
    return np.array([xc[: n - k] @ xc[k:] for k in range(max_lag + 1)]) / n


def acf(series, max_lag: int) -> CorrelogramResult:
    c = autocovariance(series, max_lag)
    n = len(_values(series))
    return CorrelogramResult(np.arange(max_lag + 1), c / c[0], 2.0 / np.sqrt(n))


def levinson_durbin(r: np.ndarray):
    """Solve the Yule-Walker equations for orders 1..len(r)-1.

    Parameters
    ----------
    r : ndarray
        Autocovariances ``r[0], ..., r[p]``.

    Returns
    -------
    phi : ndarray
        AR coefficients of the order-p fit.
    reflection : ndarray
        Reflection coefficients ``k_1..k_p`` (the partial autocorrelations).
    sigma2 : float
        Innovation variance of the order-p fit.
    """
    r = np.asarray(r, dtype=float)
    p = len(r) - 1
    phi = np.zeros(p)
    refl = np.zeros(p)
    err = r[0]
    for k in range(1, p + 1):
        if err <= 1e-14 * r[0]:
            raise AnalysisError(f"Toeplitz system numerically singular at order {k}")
        acc = r[k] - phi[: k - 1] @ r[k - 1:0:-1]
        kk = acc / err
        prev = phi[: k - 1].copy()
        phi[: k - 1] = prev - kk * prev[::-1]
        phi[k - 1] = kk
        refl[k - 1] = kk
        err *= 1.0 - kk * kk
    return phi, refl, err


def parcor(series, max_lag: int) -> CorrelogramResult:
    """Partial autocorrelations; lag 0 is reported as 1."""
    c = autocovariance(series, max_lag)
    _, refl, _ = levinson_durbin(c)
    n = len(_values(series))
    return CorrelogramResult(np.arange(max_lag + 1), np.r_[1.0, refl], 2.0 / np.sqrt(n))


def cross_correlation(a, b, max_lag: int) -> CorrelogramResult:
    """corr(a[t + k], b[t]) for k = 0..max_lag.

    A positive lag means ``a`` follows ``b``: consumption responding to the
    temperature one hour earlier peaks (in magnitude) at lag 1.
    """
    x, y = _values(a), _values(b)
    if len(x) != len(y):
        raise AnalysisError("series lengths differ")
    xc, yc = _centered(x, max_lag), _centered(y, max_lag)
    n = len(x)
    denom = np.sqrt((xc @ xc) * (yc @ yc))
    coefs = np.array([xc[k:] @ yc[: n - k] for k in range(max_lag + 1)]) / denom
    return CorrelogramResult(np.arange(max_lag + 1), coefs, 2.0 / np.sqrt(n))


def centered_moving_average(x: np.ndarray, period: int) -> np.ndarray:
    """Centered MA; even periods use the 2 x period filter. NaN where it does not fit."""
    if period % 2:
        w = np.full(period, 1.0 / period)
    else:
        w = np.r_[0.5, np.ones(period - 1), 0.5] / period
    half = len(w) // 2
    out = np.full(len(x), np.nan)
    out[half: len(x) - half] = np.convolve(x, w, mode="valid")
    return out


def _fill_ends_linear(trend: np.ndarray, period: int) -> np.ndarray:
    ok = np.flatnonzero(~np.isnan(trend))
    first, last = ok[0], ok[-1]
    out = trend.copy()
    idx = np.arange(len(trend))
    for seg, where in ((ok[:period], idx < first), (ok[-period:], idx > last)):
        slope, intercept = np.polyfit(seg, trend[seg], 1)
        out[where] = slope * idx[where] + intercept
    return out


def decompose(series: RegularSeries, period: int = 24) -> Decomposition:
    """Additive classical decomposition into trend, seasonal and residual parts.

    The trend is a centered moving average, extended linearly where the window
    does not fit; the seasonal part is the per-phase mean of the detrended
    interior, shifted to zero mean; the residual is what remains, so the three
    parts always add back up to the input.
    """
    x = series.values
    if period < 2:
        raise AnalysisError("period must be >= 2")
    if len(x) < 2 * period:
        raise SeriesError(f"need at least {2 * period} samples, got {len(x)}")
    trend = centered_moving_average(x, period)
    interior = ~np.isnan(trend)
    detrended = x - trend
    phase = np.arange(len(x)) % period
    means = np.array([detrended[interior & (phase == k)].mean() for k in range(period)])
    means -= means.mean()
    trend = _fill_ends_linear(trend, period)
    seasonal = means[phase]
    residual = x - trend - seasonal

    # components of a counter are not counters themselves
    unit = Unit.DEG_C if series.unit is Unit.DEG_C else Unit.KWH_PER_STEP

    def wrap(v):
        return RegularSeries(series.start, v, series.step, unit)

    return Decomposition(wrap(trend), wrap(seasonal), wrap(residual))


def rolling_stats(series, window: int = 24) -> dict:
    """Rolling mean and variance over non-overlapping blocks, a rough stationarity check."""
    x = _values(series)
    nblocks = len(x) // window
    blocks = x[: nblocks * window].reshape(nblocks, window)
    return {"window": window, "mean": blocks.mean(axis=1).tolist(), "variance": blocks.var(axis=1).tolist()}
