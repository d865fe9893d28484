"""Fixation-target trajectories and simulated yaw head traces."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

PEAK_SPEEDS = {"slow": 52.0, "fast": 157.0}
DEFAULT_LAG_TAU = 0.1
DEFAULT_JITTER_SD = 0.5


def _condition(name: str) -> str:
    key = str(name).lower()
    if key not in PEAK_SPEEDS:
        raise ValueError(f"unknown condition {name!r}; expected one of {sorted(PEAK_SPEEDS)}")
    return key


@dataclass(frozen=True)
class MotionProfile:
    """Sinusoidal-velocity sweep of the fixation target within +/- sweep_half_range deg.

    `start_azimuth` defaults to the bound opposite the direction of travel,
    so a half cycle sweeps the whole range.
    """

    condition: str
    peak_speed: float
    sweep_half_range: float = 50.0
    interval_duration: float = 2.5
    sample_rate: float = 90.0
    start_azimuth: float | None = None
    direction: int = 1
    cycle_period: float | None = None

    def __post_init__(self):
        if self.peak_speed <= 0 or self.sample_rate <= 0 or self.interval_duration <= 0:
            raise ValueError("peak_speed, sample_rate and interval_duration must be positive")
        if self.sweep_half_range <= 0:
            raise ValueError("sweep_half_range must be positive")
        if self.direction not in (1, -1):
            raise ValueError("direction must be +1 or -1")
        if self.start_azimuth is None:
            object.__setattr__(self, "start_azimuth",
                               -self.direction * self.sweep_half_range)
        if abs(self.start_azimuth) > self.sweep_half_range:
            raise ValueError("|start_azimuth| must not exceed sweep_half_range")
        if self.cycle_period is not None and self.cycle_period <= 0:
            raise ValueError("cycle_period must be positive")

    @classmethod
    def for_condition(cls, condition: str, **overrides) -> "MotionProfile":
        key = _condition(condition)
        overrides.setdefault("peak_speed", PEAK_SPEEDS[key])
        return cls(condition=key, **overrides)

    @property
    def period(self) -> float:
        """Velocity cycle length; by default half a cycle spans the full sweep."""
        if self.cycle_period is not None:
            return self.cycle_period
        return 2.0 * math.pi * self.sweep_half_range / self.peak_speed


@dataclass(frozen=True, eq=False)
class KinematicTrace:
    timestamps: np.ndarray
    azimuth: np.ndarray
    derived_speed: np.ndarray = field(default=None)
    sweep_half_range: float | None = None

    def __post_init__(self):
        t = np.asarray(self.timestamps, dtype=float)
        a = np.asarray(self.azimuth, dtype=float)
        if t.shape != a.shape or t.ndim != 1 or len(t) == 0:
            raise ValueError("timestamps and azimuth must be equal-length 1-D arrays")
        if t[0] != 0.0 or np.any(np.diff(t) <= 0):
            raise ValueError("timestamps must start at 0 and increase strictly")
        if self.sweep_half_range is not None and np.any(
                np.abs(a) > self.sweep_half_range + 1e-9):
            raise ValueError("azimuth leaves the sweep range")
        if self.derived_speed is None:
            d = np.zeros_like(a)
            d[1:] = np.abs(np.diff(a)) / np.diff(t)
        else:
            d = np.asarray(self.derived_speed, dtype=float)
        for arr in (t, a, d):
            arr.setflags(write=False)
        object.__setattr__(self, "timestamps", t)
        object.__setattr__(self, "azimuth", a)
        object.__setattr__(self, "derived_speed", d)

    def __len__(self):
        return len(self.timestamps)

    @property
    def dt(self) -> float:
        return float(self.timestamps[1] - self.timestamps[0]) if len(self) > 1 else 0.0


def reflect(x, half_range: float) -> np.ndarray:
    """Fold unbounded positions into [-half_range, half_range] by mirroring at the bounds."""
    period = 4.0 * half_range
    y = np.mod(np.asarray(x, dtype=float) + half_range, period)
    y = np.where(y > 2.0 * half_range, period - y, y)
    return y - half_range


def sample_times(duration: float, rate: float) -> np.ndarray:
    n = int(round(duration * rate))
    return np.arange(n + 1) / rate


def fixation_trajectory(profile: MotionProfile) -> KinematicTrace:
    """Raised-cosine azimuth: the velocity is peak_speed * sin(2 pi t / T), starting at rest."""
    t = sample_times(profile.interval_duration, profile.sample_rate)
    T = profile.period
    amplitude = profile.peak_speed * T / (2.0 * math.pi)
    raw = profile.start_azimuth + profile.direction * amplitude * (
        1.0 - np.cos(2.0 * math.pi * t / T))
    az = reflect(raw, profile.sweep_half_range)
    return KinematicTrace(t, az, sweep_half_range=profile.sweep_half_range)


def simulate_head_trace(target: KinematicTrace, lag_tau: float = DEFAULT_LAG_TAU,
                        jitter_sd: float = DEFAULT_JITTER_SD, seed=0) -> KinematicTrace:
    """First-order lag of the target azimuth plus Gaussian jitter.

    The lag is the exact discretisation y[n] = y[n-1] + (1 - exp(-dt/tau)) (x[n] - y[n-1]),
    started at the target's first sample. Results are clipped to the target's
    sweep range when it has one.
    """
    if lag_tau < 0 or jitter_sd < 0:
        raise ValueError("lag_tau and jitter_sd must be non-negative")
    x = target.azimuth
    if lag_tau > 0 and len(x) > 1:
        alpha = 1.0 - math.exp(-target.dt / lag_tau)
        y, _ = lfilter([alpha], [1.0, alpha - 1.0], x, zi=[(1.0 - alpha) * x[0]])
    else:
        y = x.copy()
    if jitter_sd > 0:
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        y = y + rng.normal(0.0, jitter_sd, len(y))
    h = target.sweep_half_range
    if h is not None:
        y = np.clip(y, -h, h)
    return KinematicTrace(target.timestamps, y, sweep_half_range=h)


def angular_speed(trace: KinematicTrace) -> np.ndarray:
    """|d azimuth / dt| by central differences, one-sided at the ends (deg/s)."""
    if len(trace) < 2:
        raise ValueError("angular_speed needs at least two samples")
    t = trace.timestamps
    steps = np.diff(t)
    spacing = trace.dt if np.allclose(steps, steps[0], rtol=1e-9, atol=0) else t
    return np.abs(np.gradient(trace.azimuth, spacing))


def filter_gain(omega: float, tau: float) -> float:
    """Amplitude gain of a continuous first-order lag at angular frequency omega."""
    return 1.0 / math.sqrt(1.0 + (omega * tau) ** 2)
