"""Slow, independent reference implementations used only by the tests."""
from __future__ import annotations

import itertools

import numpy as np


def svr_dual_brute_force(K, y, C, eps, tol=1e-9):
    """Maximize y.b - eps*|b|_1 - 0.5 b'Kb subject to sum(b) = 0, |b_i| <= C.

    Every coefficient is assigned one of five states: at -C, free negative,
    zero, free positive, at +C. For each assignment the free coefficients
    solve the stationarity equations of that face (with a common multiplier
    for the equality constraint). The concave optimum is the best candidate
    that is consistent with its own assignment.
    """
    K = np.asarray(K, dtype=float)
    y = np.asarray(y, dtype=float)
    m = len(y)
    best_val, best_beta = -np.inf, None
    for states in itertools.product(range(5), repeat=m):
        states = np.array(states)
        beta = np.zeros(m)
        beta[states == 0] = -C
        beta[states == 4] = C
        free = np.flatnonzero((states == 1) | (states == 3))
        fixed = np.flatnonzero((states != 1) & (states != 3))
        if len(free) == 0:
            if abs(beta.sum()) > tol:
                continue
        else:
            sign = np.where(states[free] == 3, 1.0, -1.0)
            nf = len(free)
            A = np.zeros((nf + 1, nf + 1))
            A[:nf, :nf] = K[np.ix_(free, free)]
            A[:nf, nf] = 1.0
            A[nf, :nf] = 1.0
            rhs = np.r_[y[free] - eps * sign - K[np.ix_(free, fixed)] @ beta[fixed], -beta[fixed].sum()]
            try:
                sol = np.linalg.solve(A, rhs)
            except np.linalg.LinAlgError:
                continue
            b = sol[:nf]
            if np.any(sign * b < -tol) or np.any(np.abs(b) > C + tol):
                continue
            beta[free] = b
        val = y @ beta - eps * np.abs(beta).sum() - 0.5 * beta @ K @ beta
        if val > best_val:
            best_val, best_beta = val, beta
    return best_val, best_beta


def interpolate_segments(times, values, grid):
    """Piecewise-linear interpolation written as an explicit per-segment loop."""
    out = []
    for t in grid:
        for k in range(len(times) - 1):
            t0, t1 = times[k], times[k + 1]
            if t0 <= t <= t1:
                w = (t - t0) / (t1 - t0)
                out.append(values[k] * (1 - w) + values[k + 1] * w)
                break
        else:
            raise ValueError(f"{t} outside the data")
    return np.array(out)


def yule_walker(r):
    """AR coefficients of every order by a dense solve of the Toeplitz system."""
    r = np.asarray(r, dtype=float)
    p = len(r) - 1
    pacf = []
    for k in range(1, p + 1):
        R = np.array([[r[abs(i - j)] for j in range(k)] for i in range(k)])
        phi = np.linalg.solve(R, r[1:k + 1])
        pacf.append(phi[-1])
    return phi, np.array(pacf)


def sphere(target):
    target = np.asarray(target, dtype=float)

    def f(x):
        d = np.log10(np.asarray(x, dtype=float)) - target
        return float(d @ d)

    return f
