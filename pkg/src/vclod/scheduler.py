"""Per-frame LOD selection from rotational head speed."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kinematics import KinematicTrace, angular_speed


@dataclass(frozen=True)
class SchedulerConfig:
    """How speed maps to a chain index.

    binary: index `degraded_level_index` while speed >= threshold_fraction *
    reference_peak_speed, else 0. With `hysteresis` > 0 the degraded state is
    left only once speed falls below (threshold_fraction - hysteresis) * peak.

    graded: index = floor(clamp(speed / peak, 0, 1) * chain_level_count),
    capped at chain_level_count - 1.
    """

    mode: str = "binary"
    threshold_fraction: float = 0.5
    reference_peak_speed: float = 157.0
    degraded_level_index: int = 1
    chain_level_count: int = 8
    hysteresis: float = 0.0

    def __post_init__(self):
        mode = self.mode.lower()
        object.__setattr__(self, "mode", mode)
        if mode not in ("binary", "graded"):
            raise ValueError(f"mode must be 'binary' or 'graded', got {self.mode!r}")
        if not 0.0 < self.threshold_fraction < 1.0:
            raise ValueError("threshold_fraction must lie in (0, 1)")
        if self.reference_peak_speed <= 0:
            raise ValueError("reference_peak_speed must be positive")
        if mode == "binary" and self.degraded_level_index < 1:
            raise ValueError("degraded_level_index must be >= 1 in binary mode")
        if self.chain_level_count < 1:
            raise ValueError("chain_level_count must be >= 1")
        if not 0.0 <= self.hysteresis < self.threshold_fraction:
            raise ValueError("hysteresis must lie in [0, threshold_fraction)")


@dataclass(frozen=True, eq=False)
class LodSchedule:
    timestamps: np.ndarray
    level_index: np.ndarray

    @property
    def switch_count(self) -> int:
        return int(np.count_nonzero(np.diff(self.level_index)))

    def __len__(self):
        return len(self.level_index)


def schedule_speeds(speeds, timestamps, config: SchedulerConfig) -> LodSchedule:
    speeds = np.asarray(speeds, dtype=float)
    if speeds.size == 0:
        raise ValueError("cannot schedule an empty trace")
    if config.mode == "binary":
        enter = speeds >= config.threshold_fraction * config.reference_peak_speed
        if config.hysteresis > 0:
            stay = speeds >= (config.threshold_fraction - config.hysteresis) * config.reference_peak_speed
            state = np.zeros(len(speeds), dtype=bool)
            on = False
            for i in range(len(speeds)):
                on = enter[i] or (on and stay[i])
                state[i] = on
            enter = state
        idx = np.where(enter, config.degraded_level_index, 0)
    else:
        s = np.clip(speeds / config.reference_peak_speed, 0.0, 1.0)
        idx = np.minimum(np.floor(s * config.chain_level_count), config.chain_level_count - 1)
    return LodSchedule(np.asarray(timestamps, dtype=float), idx.astype(np.int64))


def schedule(trace: KinematicTrace, config: SchedulerConfig) -> LodSchedule:
    """Map each frame's angular speed (central differences) to a chain index."""
    if len(trace) == 0:
        raise ValueError("cannot schedule an empty trace")
    speeds = angular_speed(trace) if len(trace) > 1 else np.zeros(1)
    return schedule_speeds(speeds, trace.timestamps, config)


def degraded_fraction(sched: LodSchedule) -> float:
    """Fraction of frames showing anything other than the reference (index 0)."""
    if len(sched) == 0:
        raise ValueError("empty schedule")
    return float(np.mean(sched.level_index > 0))
