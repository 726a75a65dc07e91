"""Global-best particle swarm optimization over a log10-scaled box."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

# (C, gamma, epsilon)
DEFAULT_BOUNDS = ((1e-3, 1e5), (1e-3, 1e3), (1e-8, 1e-1))


@dataclass(frozen=True)
class PsoConfig:
    n_particles: int = 20
    n_iterations: int = 50
    inertia: float = 1.0
    c1: float = 2.0
    c2: float = 2.0
    bounds: tuple = DEFAULT_BOUNDS
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_particles < 1 or self.n_iterations < 1:
            raise ValueError("n_particles and n_iterations must be >= 1")
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        for lo, hi in bounds:
            if not (0 < lo < hi):
                raise ValueError(f"bad bounds ({lo}, {hi}): need 0 < low < high")
        object.__setattr__(self, "bounds", bounds)

    @property
    def log_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        b = np.log10(np.array(self.bounds))
        return b[:, 0], b[:, 1]


@dataclass
class Particle:
    position: np.ndarray
    velocity: np.ndarray
    best_position: np.ndarray
    best_fitness: float = np.inf


@dataclass
class PsoResult:
    best_position: np.ndarray  # original (not log) scale
    best_fitness: float
    history: list[float]
    trace: list[dict] = field(default_factory=list)
    n_evaluations: int = 0


def _safe(value) -> float:
    value = float(value)
    return value if np.isfinite(value) else np.inf


def optimize(fitness: Callable[[np.ndarray], float], config: PsoConfig,
             map_fn: Callable | None = None,
             init_positions: Sequence | None = None) -> PsoResult:
    """Minimize ``fitness`` over the box ``config.bounds``.

    Particles move in log10 coordinates; ``fitness`` receives positive reals on
    the original scale. Non-finite fitness values count as ``+inf``.

    ``map_fn`` (e.g. ``executor.map``) evaluates one iteration's particles; it
    must return results in input order. ``init_positions`` overrides the random
    initial positions (original scale) and is mainly for tests.
    """
    lo, hi = config.log_bounds
    dim = len(lo)
    vmax = (hi - lo) / 2.0
    box = np.array(config.bounds)

    def to_orig(p):
        return np.clip(10.0 ** p, box[:, 0], box[:, 1])
    rng = np.random.default_rng(config.rng_seed)
    evaluate = map_fn or map

    if init_positions is None:
        pos = lo + (hi - lo) * rng.random((config.n_particles, dim))
    else:
        pos = np.log10(np.asarray(init_positions, dtype=float)).reshape(config.n_particles, dim)
        pos = np.clip(pos, lo, hi)
    swarm = [Particle(p.copy(), np.zeros(dim), p.copy()) for p in pos]

    def run(points):
        return [_safe(f) for f in evaluate(fitness, [to_orig(p) for p in points])]

    n_eval = 0
    for part, f in zip(swarm, run([p.position for p in swarm])):
        part.best_fitness = f
    n_eval += len(swarm)

    g = min(range(len(swarm)), key=lambda k: swarm[k].best_fitness)
    g_pos = swarm[g].best_position.copy()
    g_fit = swarm[g].best_fitness
    history, trace = [], []

    for it in range(config.n_iterations):
        # random draws in particle order, before any evaluation is dispatched
        r = rng.random((len(swarm), 2, 1))
        for k, part in enumerate(swarm):
            v = (
                config.inertia * part.velocity
                + config.c1 * r[k, 0] * (part.best_position - part.position)
                + config.c2 * r[k, 1] * (g_pos - part.position)
            )
            v = np.clip(v, -vmax, vmax)
            p = part.position + v
            out = (p < lo) | (p > hi)
            p = np.clip(p, lo, hi)
            v[out] = 0.0
            part.position, part.velocity = p, v

        values = run([p.position for p in swarm])
        n_eval += len(swarm)
        for part, f in zip(swarm, values):
            if f < part.best_fitness:
                part.best_fitness = f
                part.best_position = part.position.copy()
        k = min(range(len(swarm)), key=lambda k: swarm[k].best_fitness)
        if swarm[k].best_fitness < g_fit:
            g_fit = swarm[k].best_fitness
            g_pos = swarm[k].best_position.copy()
        history.append(g_fit)
        trace.append({"iteration": it, "best_position": to_orig(g_pos).tolist(), "best_fitness": g_fit})

    return PsoResult(to_orig(g_pos), g_fit, history, trace, n_eval)
