"""Epsilon-insensitive support vector regression with an RBF kernel.

The dual is solved by sequential minimal optimization on the usual
2m-variable form (alpha, alpha*) with maximal-violating-pair working-set
selection. A trained model keeps only the differences
``beta = alpha - alpha*`` for the points where they are non-zero.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

MODEL_FORMAT = "heatload.svr/1"
TAU = 1e-12
ROUND_LEN = 2000  # SMO updates between Newton attempts
MAX_NEWTON = 3    # Newton attempts per solve
RIDGE = 1e-10     # diagonal shift in the Newton system (kernel diagonal is 1)


class SvrError(ValueError):
    pass


@dataclass(frozen=True)
class Hyperparams:
    C: float
    gamma: float
    epsilon: float

    def __post_init__(self):
        for name in ("C", "gamma", "epsilon"):
            if not np.isfinite(getattr(self, name)):
                raise SvrError(f"{name} must be finite")
        if self.C <= 0 or self.gamma <= 0 or self.epsilon < 0:
            raise SvrError(f"invalid hyper-parameters {self}")

    def as_dict(self) -> dict:
        return {"C": self.C, "gamma": self.gamma, "epsilon": self.epsilon}


@dataclass(frozen=True)
class Scaler:
    """Per-column z-score transform. A zero spread is replaced by 1."""

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, data) -> "Scaler":
        data = np.asarray(data, dtype=float)
        mean = data.mean(axis=0)
        scale = data.std(axis=0)
        scale = np.where(scale > 0, scale, 1.0)
        return cls(np.atleast_1d(mean), np.atleast_1d(scale))

    @classmethod
    def identity(cls, dim: int) -> "Scaler":
        return cls(np.zeros(dim), np.ones(dim))

    def transform(self, data):
        return (np.asarray(data, dtype=float) - self.mean) / self.scale

    def inverse(self, data):
        return np.asarray(data, dtype=float) * self.scale + self.mean

    def as_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Scaler":
        return cls(np.array(d["mean"], dtype=float), np.array(d["scale"], dtype=float))


def rbf_kernel(x, y, gamma: float) -> float:
    """exp(-gamma * ||x - y||^2)"""
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    return float(np.exp(-gamma * np.dot(d, d)))


def gram_matrix(X, Z, gamma: float) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    sq = (
        np.sum(X * X, axis=1)[:, None]
        + np.sum(Z * Z, axis=1)[None, :]
        - 2.0 * X @ Z.T
    )
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


@njit(cache=True, nogil=True)
def _select(a, G, C, m):
    # i: argmax of -s*G over I_up, j: argmin of -s*G over I_low.
    # Strict comparisons keep the lowest index on ties.
    gmax = -np.inf
    gmin = np.inf
    i = -1
    j = -1
    for t in range(2 * m):
        if t < m:
            if a[t] < C and -G[t] > gmax:
                gmax = -G[t]
                i = t
            if a[t] > 0.0 and -G[t] < gmin:
                gmin = -G[t]
                j = t
        else:
            if a[t] > 0.0 and G[t] > gmax:
                gmax = G[t]
                i = t
            if a[t] < C and G[t] < gmin:
                gmin = G[t]
                j = t
    return i, j, gmax - gmin


@njit(cache=True, nogil=True)
def _smo(K, y, C, eps, tol, max_iter, a, G, history):
    """Two-variable updates on (a, G) in place until the gap drops below tol.

    ``history`` (length 0 or max_iter) receives the dual objective after
    each update. Returns (iterations, converged, gap).
    """
    m = y.shape[0]
    record = history.shape[0] > 0
    it = 0
    i, j, gap = _select(a, G, C, m)
    while True:
        if gap <= tol:
            return it, True, gap
        if it >= max_iter:
            return it, False, gap

        si = 1.0 if i < m else -1.0
        sj = 1.0 if j < m else -1.0
        ki = i % m
        kj = j % m
        Kii = K[ki, ki]
        Kjj = K[kj, kj]
        Qij = si * sj * K[ki, kj]
        ai_old = a[i]
        aj_old = a[j]
        if si != sj:
            quad = Kii + Kjj + 2.0 * Qij
            if quad <= 0.0:
                quad = TAU
            delta = (-G[i] - G[j]) / quad
            diff = a[i] - a[j]
            a[i] += delta
            a[j] += delta
            if diff > 0.0:
                if a[j] < 0.0:
                    a[j] = 0.0
                    a[i] = diff
            else:
                if a[i] < 0.0:
                    a[i] = 0.0
                    a[j] = -diff
            if diff > 0.0:
                if a[i] > C:
                    a[i] = C
                    a[j] = C - diff
            else:
                if a[j] > C:
                    a[j] = C
                    a[i] = C + diff
        else:
            quad = Kii + Kjj - 2.0 * Qij
            if quad <= 0.0:
                quad = TAU
            delta = (G[i] - G[j]) / quad
            total = a[i] + a[j]
            a[i] -= delta
            a[j] += delta
            if total > C:
                if a[i] > C:
                    a[i] = C
                    a[j] = total - C
            else:
                if a[j] < 0.0:
                    a[j] = 0.0
                    a[i] = total
            if total > C:
                if a[j] > C:
                    a[j] = C
                    a[i] = total - C
            else:
                if a[i] < 0.0:
                    a[i] = 0.0
                    a[j] = total

        dai = (a[i] - ai_old) * si
        daj = (a[j] - aj_old) * sj
        # K is symmetric; rows are contiguous
        for t in range(m):
            g = K[ki, t] * dai + K[kj, t] * daj
            G[t] += g
            G[t + m] -= g
        i, j, gap = _select(a, G, C, m)
        if record:
            f = 0.0
            for t in range(m):
                f += a[t] * (G[t] + eps - y[t]) + a[t + m] * (G[t + m] + eps + y[t])
            history[it] = -0.5 * f
        it += 1


@njit(cache=True, nogil=True)
def _bias(a, G, C, m):
    # average over free variables, else midpoint of the feasible interval
    ub = np.inf
    lb = -np.inf
    nfree = 0
    sfree = 0.0
    for t in range(2 * m):
        s = 1.0 if t < m else -1.0
        yG = s * G[t]
        if a[t] >= C:
            if s < 0:
                ub = min(ub, yG)
            else:
                lb = max(lb, yG)
        elif a[t] <= 0.0:
            if s > 0:
                ub = min(ub, yG)
            else:
                lb = max(lb, yG)
        else:
            nfree += 1
            sfree += yG
    if nfree > 0:
        return -sfree / nfree
    return -0.5 * (ub + lb)


def _state(K, y, beta, C, eps):
    """(a, G) for the 2m-variable problem at a given beta."""
    beta = np.clip(beta, -C, C)
    a = np.r_[np.maximum(beta, 0.0), np.maximum(-beta, 0.0)]
    Kb = K @ beta
    G = np.r_[Kb + eps - y, -Kb + eps + y]
    return a, G


def _newton_step(K, y, beta, C, eps):
    """Newton step for the variables below the bound, truncated to the box.

    Variables at +-C stay there. The others, with the sign of the current
    coefficient (or of the residual where it is zero) frozen, solve the
    stationarity conditions together with sum(beta) = 0. A tiny ridge keeps
    the system solvable when the kernel matrix is numerically singular. The
    step is then shortened until it stays inside [-C, C]. Returns None when
    nothing useful comes out; callers keep the step only if it raises the
    dual objective, so any direction is safe.
    """
    F = np.flatnonzero(np.abs(beta) < C)
    if len(F) == 0:
        return None
    B = np.flatnonzero(np.abs(beta) >= C)
    resid = y[F] - K[F] @ beta
    sign = np.where(beta[F] > 0, 1.0, np.where(beta[F] < 0, -1.0, np.where(resid >= 0, 1.0, -1.0)))
    nf = len(F)
    A = np.empty((nf + 1, nf + 1))
    A[:nf, :nf] = K[np.ix_(F, F)]
    A[np.arange(nf), np.arange(nf)] += RIDGE
    A[:nf, nf] = 1.0
    A[nf, :nf] = 1.0
    A[nf, nf] = 0.0
    rhs = np.empty(nf + 1)
    rhs[:nf] = y[F] - eps * sign - K[np.ix_(F, B)] @ beta[B]
    rhs[nf] = -beta[B].sum()
    try:
        sol = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(sol)):
        return None
    d = sol[:nf] - beta[F]
    up = d > 0
    down = d < 0
    t = 1.0
    if np.any(up):
        t = min(t, np.min((C - beta[F][up]) / d[up]))
    if np.any(down):
        t = min(t, np.min((-C - beta[F][down]) / d[down]))
    if t <= 0:
        return None
    cand = beta.copy()
    cand[F] = np.clip(beta[F] + t * d, -C, C)
    return cand


@dataclass(frozen=True)
class DualSolution:
    beta: np.ndarray
    bias: float
    n_iter: int
    converged: bool
    kkt_gap: float
    objective_history: np.ndarray = field(repr=False)


def dual_objective(K, y, beta, epsilon: float) -> float:
    """y.beta - eps*|beta|_1 - 0.5 beta'K beta, the quantity SMO maximizes."""
    beta = np.asarray(beta, dtype=float)
    return float(y @ beta - epsilon * np.abs(beta).sum() - 0.5 * beta @ K @ beta)


def solve_dual(K, y, C: float, epsilon: float, tol: float = 1e-3,
               max_iter: int | None = None, record: bool = False,
               polish: bool = True) -> DualSolution:
    """Run SMO on a precomputed kernel matrix.

    With ``polish`` the SMO run is split into rounds; after each round a
    Newton step on the free set is tried and kept only if it stays feasible
    and raises the dual objective. This matters when C is large and the
    kernel is smooth: the optimum then has almost every coefficient free and
    plain SMO needs millions of updates to get near it.

    With ``record=True`` the dual objective after every two-variable update
    (and after every accepted polishing step) is returned in
    ``objective_history``; index 0 is the zero starting point.
    """
    K = np.ascontiguousarray(K, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    m = len(y)
    if K.shape != (m, m):
        raise SvrError("kernel matrix shape does not match targets")
    if tol <= 0:
        raise SvrError("tol must be positive")
    if max_iter is None:
        max_iter = 10 * m * m
    C, eps = float(C), float(epsilon)
    a = np.zeros(2 * m)
    G = np.r_[eps - y, eps + y]
    hist = [np.zeros(1)] if record else None
    round_len = ROUND_LEN if polish else max_iter
    total = 0
    rounds = 0
    next_try, wait = 0, 1
    tries = 0
    while True:
        if polish and rounds == next_try and tries < MAX_NEWTON:
            tries += 1
            beta = a[:m] - a[m:]
            cand = _newton_step(K, y, beta, C, eps)
            accepted = False
            if cand is not None:
                value = dual_objective(K, y, cand, eps)
                if value > dual_objective(K, y, beta, eps):
                    a, G = _state(K, y, cand, C, eps)
                    accepted = True
                    if record:
                        hist.append(np.array([value]))
            # back off while the steps keep failing
            wait = 1 if accepted else 2 * wait
            next_try = rounds + wait
        rounds += 1
        budget = min(round_len, max_iter - total)
        buf = np.empty(budget if record else 0)
        it, conv, gap = _smo(K, y, C, eps, float(tol), int(budget), a, G, buf)
        total += it
        if record:
            hist.append(buf[:it])
        if conv or total >= max_iter:
            break
    _, _, gap = _select(a, G, C, m)
    conv = gap <= tol
    bias = _bias(a, G, C, m)
    beta = a[:m] - a[m:]
    history = np.concatenate(hist) if record else np.empty(0)
    return DualSolution(beta, float(bias), int(total), bool(conv), float(gap), history)


@dataclass(frozen=True)
class SvrModel:
    """Trained model. Inputs and outputs of :meth:`predict` are in original units."""

    support_vectors: np.ndarray
    dual_coefs: np.ndarray
    bias: float
    hyper: Hyperparams
    feature_scaler: Scaler
    target_scaler: Scaler
    converged: bool = True
    n_iter: int = 0

    def decision(self, Xs) -> np.ndarray:
        """Raw kernel expansion on already standardized inputs."""
        Xs = np.atleast_2d(np.asarray(Xs, dtype=float))
        if len(self.dual_coefs) == 0:
            return np.full(len(Xs), self.bias)
        return gram_matrix(Xs, self.support_vectors, self.hyper.gamma) @ self.dual_coefs + self.bias

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        out = self.target_scaler.inverse(self.decision(self.feature_scaler.transform(np.atleast_2d(X))))
        return out[0] if single else out

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "hyper": self.hyper.as_dict(),
            "bias": self.bias,
            "support_vectors": self.support_vectors.tolist(),
            "dual_coefs": self.dual_coefs.tolist(),
            "feature_scaler": self.feature_scaler.as_dict(),
            "target_scaler": self.target_scaler.as_dict(),
            "converged": self.converged,
            "n_iter": self.n_iter,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SvrModel":
        if d.get("format") != MODEL_FORMAT:
            raise SvrError(f"unsupported model format {d.get('format')!r}")
        sv = np.array(d["support_vectors"], dtype=float).reshape(-1, len(d["feature_scaler"]["mean"]))
        return cls(
            support_vectors=sv,
            dual_coefs=np.array(d["dual_coefs"], dtype=float),
            bias=float(d["bias"]),
            hyper=Hyperparams(**d["hyper"]),
            feature_scaler=Scaler.from_dict(d["feature_scaler"]),
            target_scaler=Scaler.from_dict(d["target_scaler"]),
            converged=bool(d["converged"]),
            n_iter=int(d["n_iter"]),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path) -> "SvrModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def train(X, y, hyper: Hyperparams, *, tol: float = 1e-3, max_passes: int | None = None,
          feature_scaler: Scaler | None = None, target_scaler: Scaler | None = None) -> SvrModel:
    """Fit an RBF epsilon-SVR.

    Parameters
    ----------
    X : array_like, shape (m, d)
        Feature rows in original units.
    y : array_like, shape (m,)
        Targets in original units.
    hyper : Hyperparams
        ``C``, ``gamma`` and ``epsilon`` act in standardized units.
    tol : float
        Stop once the maximal KKT violation drops to ``tol``.
    max_passes : int, optional
        Cap on two-variable updates, default ``10 * m**2``. Hitting the cap is
        not an error; the model is returned with ``converged=False``.
    feature_scaler, target_scaler : Scaler, optional
        Standardization applied before solving and inverted in ``predict``.
        Identity when omitted.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != y.shape[0]:
        raise SvrError("X and y have different numbers of rows")
    if len(y) < 2:
        raise SvrError("need at least 2 training rows")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise SvrError("training data must be finite")
    fs = feature_scaler or Scaler.identity(X.shape[1])
    ts = target_scaler or Scaler.identity(1)
    Xs = fs.transform(X)
    ys = ts.transform(y[:, None]).ravel()

    K = gram_matrix(Xs, Xs, hyper.gamma)
    sol = solve_dual(K, ys, hyper.C, hyper.epsilon, tol=tol, max_iter=max_passes)
    sv = sol.beta != 0.0
    return SvrModel(
        support_vectors=Xs[sv].copy(),
        dual_coefs=sol.beta[sv].copy(),
        bias=sol.bias,
        hyper=hyper,
        feature_scaler=fs,
        target_scaler=ts,
        converged=sol.converged,
        n_iter=sol.n_iter,
    )


def slacks(model: SvrModel, X, y):
    """Tube violations (zeta, zeta*) of each row, in standardized target units."""
    ys = model.target_scaler.transform(np.asarray(y, dtype=float)[:, None]).ravel()
    f = model.decision(model.feature_scaler.transform(np.atleast_2d(X)))
    eps = model.hyper.epsilon
    return np.maximum(0.0, ys - f - eps), np.maximum(0.0, f - ys - eps)
