"""ARIMA (conditional sum of squares) and seasonal-naive baselines.

Both operate on the hourly load series, not on the accumulated counter.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.signal import lfilter

from .series import RegularSeries, Unit


class ArimaError(ValueError):
    pass


@dataclass(frozen=True)
class ArimaOrder:
    p: int
    d: int
    q: int

    def __post_init__(self):
        if not (0 <= self.p <= 5 and 0 <= self.q <= 5 and self.d in (0, 1)):
            raise ArimaError(f"order {self} outside p<=5, d<=1, q<=5")

    @property
    def n_params(self) -> int:
        return self.p + self.q + 1


@dataclass(frozen=True)
class ArimaModel:
    order: ArimaOrder
    ar_coefs: np.ndarray
    ma_coefs: np.ndarray
    intercept: float
    sigma2: float
    aic: float

    @property
    def mean(self) -> float:
        """Unconditional mean of the (differenced) process."""
        return self.intercept / (1.0 - self.ar_coefs.sum())


def css_residuals(x: np.ndarray, p: int, q: int, intercept: float, ar, ma) -> np.ndarray:
    """One-step residuals e_t for t >= p, pre-sample residuals taken as zero.

    e_t + sum_j ma_j e_{t-j} = x_t - c - sum_i ar_i x_{t-i} is an all-pole
    filter, so the MA recursion runs through ``lfilter`` with zero state.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    u = x[p:] - intercept
    for i in range(p):
        u = u - ar[i] * x[p - 1 - i: n - 1 - i]
    if q == 0:
        return u
    return lfilter([1.0], np.r_[1.0, np.asarray(ma, dtype=float)], u)


def is_stationary(ar, tol: float = 1e-6) -> bool:
    """True when all roots of 1 - phi_1 z - ... - phi_p z^p lie outside the unit circle."""
    ar = np.asarray(ar, dtype=float)
    if len(ar) == 0:
        return True
    # numpy wants highest degree first
    roots = np.roots(np.r_[-ar[::-1], 1.0])
    return bool(np.all(np.abs(roots) > 1.0 + tol))


def is_invertible(ma, tol: float = 1e-6) -> bool:
    """True when all roots of 1 + theta_1 z + ... + theta_q z^q lie outside the unit circle."""
    ma = np.asarray(ma, dtype=float)
    return is_stationary(-ma, tol)


def _ar_least_squares(x: np.ndarray, p: int) -> np.ndarray:
    """Intercept and AR coefficients by ordinary least squares."""
    if p == 0:
        return np.array([x.mean()])
    rows = np.column_stack([np.ones(len(x) - p)] + [x[p - 1 - i: len(x) - 1 - i] for i in range(p)])
    coef, *_ = np.linalg.lstsq(rows, x[p:], rcond=None)
    return coef


def fit_arima(series, order: ArimaOrder) -> ArimaModel:
    """Conditional-sum-of-squares fit, Nelder-Mead started from OLS AR estimates."""
    x = series.values if isinstance(series, RegularSeries) else np.asarray(series, dtype=float)
    p, d, q = order.p, order.d, order.q
    if len(x) < 10 * order.n_params:
        raise ArimaError(f"need at least {10 * order.n_params} samples for order {order}")
    if d:
        x = np.diff(x)
    start = np.r_[_ar_least_squares(x, p), np.zeros(q)]

    def sse(theta):
        e = css_residuals(x, p, q, theta[0], theta[1:1 + p], theta[1 + p:])
        val = e @ e
        return val if np.isfinite(val) else np.inf

    if p + q == 0:
        theta = start
    else:
        res = minimize(
            sse, start, method="Nelder-Mead",
            options={"maxiter": 500, "xatol": 1e-8, "fatol": np.inf, "adaptive": False},
        )
        theta = res.x
    ar, ma = theta[1:1 + p], theta[1 + p:]
    if not is_stationary(ar):
        raise ArimaError(f"non-stationary AR estimate for order {order}")
    if not is_invertible(ma):
        # CSS can fit transients of an explosive residual filter
        raise ArimaError(f"non-invertible MA estimate for order {order}")
    e = css_residuals(x, p, q, theta[0], ar, ma)
    n = len(e)
    s = float(e @ e)
    if not np.isfinite(s) or not np.all(np.isfinite(theta)):
        raise ArimaError(f"non-finite fit for order {order}")
    aic = n * np.log(max(s, 1e-300) / n) + 2 * order.n_params
    return ArimaModel(order, ar.copy(), ma.copy(), float(theta[0]), s / n, float(aic))


def select_order(series, max_p: int = 3, max_q: int = 3) -> ArimaOrder:
    """Minimum-AIC order; d = 1 when the lag-1 autocorrelation exceeds 0.95."""
    x = series.values if isinstance(series, RegularSeries) else np.asarray(series, dtype=float)
    xc = x - x.mean()
    r1 = (xc[:-1] @ xc[1:]) / (xc @ xc) if np.any(xc) else 0.0
    d = 1 if r1 > 0.95 else 0
    best = None
    for p, q in itertools.product(range(max_p + 1), range(max_q + 1)):
        order = ArimaOrder(p, d, q)
        try:
            model = fit_arima(x, order)
        except ArimaError:
            continue
        key = (model.aic, p + q, p)
        if best is None or key < best[0]:
            best = (key, order)
    if best is None:
        raise ArimaError("every candidate order failed")
    return best[1]


def forecast_arima(model: ArimaModel, history, horizon: int) -> RegularSeries:
    """Recursive point forecasts with future shocks set to zero."""
    h = history.values if isinstance(history, RegularSeries) else np.asarray(history, dtype=float)
    p, d, q = model.order.p, model.order.d, model.order.q
    if len(h) < max(1, p + q + d):
        raise ArimaError("history too short for this order")
    x = np.diff(h) if d else h
    e = np.r_[np.zeros(p), css_residuals(x, p, q, model.intercept, model.ar_coefs, model.ma_coefs)]
    xs = list(x)
    es = list(e)
    out = []
    for _ in range(horizon):
        pred = model.intercept
        for i in range(p):
            pred += model.ar_coefs[i] * xs[-1 - i]
        for j in range(q):
            pred += model.ma_coefs[j] * es[-1 - j]
        xs.append(pred)
        es.append(0.0)
        out.append(pred)
    out = np.array(out)
    if d:
        out = h[-1] + np.cumsum(out)
    if isinstance(history, RegularSeries):
        return RegularSeries(history.end + history.step, out, history.step, history.unit)
    return RegularSeries(0, out, 1, Unit.KWH_PER_STEP)


def seasonal_naive(history, horizon: int, period: int = 24) -> RegularSeries:
    h = history.values if isinstance(history, RegularSeries) else np.asarray(history, dtype=float)
    if len(h) < period:
        raise ArimaError(f"need at least {period} samples of history")
    last = h[len(h) - period:]
    out = last[np.arange(horizon) % period]
    if isinstance(history, RegularSeries):
        return RegularSeries(history.end + history.step, out, history.step, history.unit)
    return RegularSeries(0, out, 1, Unit.KWH_PER_STEP)
