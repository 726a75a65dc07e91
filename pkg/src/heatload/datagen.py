"""Synthetic smart-meter data with known ground truth.

Random numbers come from :class:`XorShift64Star`, a self-contained generator,
so streams do not depend on the numpy version.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .series import HOUR, RawSeries, RegularSeries, Unit, format_timestamp, write_csv

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


class XorShift64Star:
    """xorshift64* (Vigna 2016), state seeded through one splitmix64 step."""

    def __init__(self, seed: int):
        state = splitmix64(int(seed) & _MASK64)
        self.state = state or 0x9E3779B97F4A7C15

    def next_u64(self) -> int:
        x = self.state
        x ^= x >> 12
        x ^= (x << 25) & _MASK64
        x ^= x >> 27
        self.state = x
        return (x * 0x2545F4914F6CDD1D) & _MASK64

    def uniform(self) -> float:
        """Uniform on [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * 2.0**-53

    def normal(self) -> float:
        # Box-Muller, cosine branch only
        u1 = 1.0 - self.uniform()
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


def default_profile(amplitude: float) -> tuple[float, ...]:
    """Morning/evening double peak built from the 2nd and 3rd daily harmonics.

    Both harmonics are orthogonal to a once-per-day temperature swing over a
    full day, so the profile does not leak into temperature correlations.
    """
    h = np.arange(24)
    shape = np.cos(4 * np.pi * (h - 7) / 24) + 0.35 * np.cos(6 * np.pi * (h - 7) / 24)
    shape = shape - shape.mean()
    return tuple(float(v) for v in amplitude * shape / np.abs(shape).max())


@dataclass(frozen=True)
class GenConfig:
    days: int = 32
    base_load: float = 2.0
    seasonal_amplitude: float = 0.4
    daily_profile: tuple | None = None
    temp_coupling: float = 0.15
    temp_reference: float = 18.0
    annual_temp_mean: float = 8.0
    annual_temp_amplitude: float = 8.0
    daily_temp_amplitude: float = 4.0
    temp_noise_stddev: float = 0.6
    temp_noise_ar: float = 0.8
    noise_stddev: float = 0.0
    coupling_lag: int = 1
    jitter_stddev: float = 0.0
    dropout_prob: float = 0.0
    start: str = "2021-01-01T00:00:00+00:00"
    rng_seed: int = 0

    def __post_init__(self):
        if self.days < 1:
            raise ValueError("days must be >= 1")
        if self.base_load <= 0:
            raise ValueError("base_load must be positive")
        if self.noise_stddev < 0 or self.jitter_stddev < 0 or self.temp_noise_stddev < 0:
            raise ValueError("standard deviations must be non-negative")
        if not 0 <= self.dropout_prob < 1:
            raise ValueError("dropout_prob must be in [0, 1)")
        if self.coupling_lag < 0:
            raise ValueError("coupling_lag must be non-negative")
        if not -1 < self.temp_noise_ar < 1:
            raise ValueError("temp_noise_ar must be in (-1, 1)")
        if self.daily_profile is not None:
            prof = tuple(float(v) for v in self.daily_profile)
            if len(prof) != 24:
                raise ValueError("daily_profile needs 24 values")
            if abs(sum(prof)) > 1e-9 * max(1.0, max(abs(v) for v in prof)):
                raise ValueError("daily_profile must sum to 0")
            object.__setattr__(self, "daily_profile", prof)

    @property
    def profile(self) -> tuple[float, ...]:
        if self.daily_profile is not None:
            return self.daily_profile
        return default_profile(self.seasonal_amplitude)

    @property
    def start_seconds(self) -> int:
        dt = datetime.fromisoformat(self.start)
        if dt.tzinfo is None:
            dt = dt.replace(tzinfo=timezone.utc)
        return int(dt.timestamp())

    def to_json(self) -> str:
        d = asdict(self)
        d["daily_profile"] = list(self.profile)
        return json.dumps(d, indent=1, sort_keys=True)


PRESETS = {
    # load is a deterministic function of the lag-1 features
    "noiseless": GenConfig(days=16, seasonal_amplitude=0.0, daily_profile=(0.0,) * 24),
    "default": GenConfig(days=32, noise_stddev=0.05, jitter_stddev=300.0, dropout_prob=0.05),
    "year": GenConfig(days=365, noise_stddev=0.1, jitter_stddev=300.0, dropout_prob=0.05),
}


def preset(name: str, **overrides) -> GenConfig:
    try:
        base = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return replace(base, **overrides)


@dataclass(frozen=True)
class Generated:
    raw_consumption: RawSeries
    raw_temperature: RawSeries
    true_load: RegularSeries
    temperature: RegularSeries = field(repr=False)
    accumulated: RegularSeries = field(repr=False)


def generate(config: GenConfig) -> Generated:
    """Draw one synthetic meter.

    Hourly grid with ``24 * days + 1`` instants. Temperature is an annual plus a
    daily sinusoid plus AR(1) noise; load responds to the temperature
    ``coupling_lag`` steps earlier through ``max(0, T_ref - T)``.
    """
    rng = XorShift64Star(config.rng_seed)
    n = 24 * config.days + 1
    lag = config.coupling_lag
    t0 = config.start_seconds
    times = t0 + HOUR * np.arange(-lag, n, dtype=np.int64)

    ar = 0.0
    innov = config.temp_noise_stddev * math.sqrt(1.0 - config.temp_noise_ar**2)
    theta = np.empty(len(times))
    for k, t in enumerate(times):
        day = t / 86400.0
        hour = (t % 86400) / 3600.0
        ar = config.temp_noise_ar * ar + innov * rng.normal()
        theta[k] = (
            config.annual_temp_mean
            - config.annual_temp_amplitude * math.cos(2 * math.pi * (day - 15.0) / 365.25)
            - config.daily_temp_amplitude * math.cos(2 * math.pi * (hour - 3.0) / 24.0)
            + ar
        )

    profile = config.profile
    load = np.empty(n)
    for i in range(n):
        hour = int((times[i + lag] % 86400) // 3600)
        heating = config.temp_coupling * max(0.0, config.temp_reference - theta[i])
        noise = config.noise_stddev * rng.normal() if config.noise_stddev > 0 else 0.0
        load[i] = max(0.0, config.base_load + profile[hour] + heating + noise)

    grid = times[lag:]
    theta = theta[lag:]
    acc = np.cumsum(load)

    # transmission timing: jitter interior instants, drop some, keep both ends
    keep = [0]
    raw_t = [int(grid[0])]
    for i in range(1, n - 1):
        jit = config.jitter_stddev * rng.normal() if config.jitter_stddev > 0 else 0.0
        jit = max(-0.45 * HOUR, min(0.45 * HOUR, jit))
        drop = config.dropout_prob > 0 and rng.uniform() < config.dropout_prob
        if not drop:
            keep.append(i)
            raw_t.append(int(round(grid[i] + jit)))
    if n > 1:
        keep.append(n - 1)
        raw_t.append(int(grid[-1]))
    raw_t = np.array(raw_t, dtype=np.int64)
    # meters report the counter at the actual instant
    raw_acc = np.interp(raw_t, grid, acc)
    raw_theta = np.interp(raw_t, grid, theta)

    return Generated(
        raw_consumption=RawSeries(raw_t, raw_acc, Unit.KWH_ACCUMULATED),
        raw_temperature=RawSeries(raw_t, raw_theta, Unit.DEG_C),
        true_load=RegularSeries(int(grid[0]), load, HOUR, Unit.KWH_PER_STEP),
        temperature=RegularSeries(int(grid[0]), theta, HOUR, Unit.DEG_C),
        accumulated=RegularSeries(int(grid[0]), acc, HOUR, Unit.KWH_ACCUMULATED),
    )


def write_dataset(gen: Generated, config: GenConfig, out_dir) -> list[Path]:
    """Write consumption.csv, temperature.csv, true_load.csv and config.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "consumption.csv", out / "temperature.csv", out / "true_load.csv", out / "config.json"]
    write_csv(paths[0], gen.raw_consumption.times, gen.raw_consumption.values)
    write_csv(paths[1], gen.raw_temperature.times, gen.raw_temperature.values)
    write_csv(paths[2], gen.true_load.times, gen.true_load.values)
    paths[3].write_text(config.to_json() + "\n")
    return paths


__all__ = [
    "GenConfig", "Generated", "PRESETS", "XorShift64Star", "default_profile",
    "format_timestamp", "generate", "preset", "splitmix64", "write_dataset",
]
