"""Simulated 2-IFC Method of Constant Stimuli with parametric observers."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .kinematics import (DEFAULT_JITTER_SD, DEFAULT_LAG_TAU, PEAK_SPEEDS, MotionProfile,
                         fixation_trajectory, simulate_head_trace)
from .psychofit import ResponseTable, psychometric
from .scheduler import SchedulerConfig, degraded_fraction, schedule
from .simplify import DEFAULT_LADDER

logger = logging.getLogger(__name__)

CONDITIONS = ("slow", "fast")
DEFAULT_LEVELS_PCT = tuple(100.0 * a for a in DEFAULT_LADDER)


@dataclass(frozen=True)
class ExperimentDesign:
    aggressiveness_levels: tuple[float, ...] = DEFAULT_LEVELS_PCT
    repetitions_per_level: int = 20
    conditions: tuple[str, ...] = CONDITIONS
    interleaved: bool = True
    seed: int = 0

    def __post_init__(self):
        levels = tuple(float(a) for a in self.aggressiveness_levels)
        object.__setattr__(self, "aggressiveness_levels", levels)
        object.__setattr__(self, "conditions", tuple(self.conditions))
        if not levels:
            raise ValueError("at least one aggressiveness level is required")
        if any(not 0.0 < a < 100.0 for a in levels):
            raise ValueError("aggressiveness levels are percentages in (0, 100)")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise ValueError("aggressiveness levels must be strictly increasing")
        if self.repetitions_per_level < 1:
            raise ValueError("repetitions_per_level must be >= 1")
        if not self.conditions or len(set(self.conditions)) != len(self.conditions):
            raise ValueError("conditions must be non-empty and distinct")

    @property
    def total_trials(self) -> int:
        return len(self.aggressiveness_levels) * self.repetitions_per_level * len(self.conditions)

    def to_dict(self) -> dict:
        return {"aggressiveness_levels": list(self.aggressiveness_levels),
                "repetitions_per_level": self.repetitions_per_level,
                "conditions": list(self.conditions), "interleaved": self.interleaved,
                "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentDesign":
        return cls(tuple(d.get("aggressiveness_levels", DEFAULT_LEVELS_PCT)),
                   int(d.get("repetitions_per_level", 20)),
                   tuple(d.get("conditions", CONDITIONS)), bool(d.get("interleaved", True)),
                   int(d.get("seed", 0)))


@dataclass(frozen=True)
class Trial:
    trial_index: int
    condition: str
    aggressiveness: float
    repetition: int
    reference_interval: int


def build_design(design: ExperimentDesign, seed=None) -> list[Trial]:
    """Shuffled trial list covering every (condition, level, repetition) cell once.

    Within each (condition, level) cell the reference goes to interval 1 on
    half the repetitions (the odd one out, if any, is a coin flip), and which
    repetitions get which interval is random. Interleaved designs shuffle
    all conditions together; otherwise conditions run in blocks.
    """
    rng = np.random.default_rng(design.seed if seed is None else seed)
    reps = design.repetitions_per_level
    cells = []
    for cond in design.conditions:
        block = []
        for a in design.aggressiveness_levels:
            intervals = [1] * (reps // 2) + [2] * (reps // 2)
            if reps % 2:
                intervals.append(int(rng.integers(1, 3)))
            intervals = rng.permutation(intervals)
            block.extend((cond, a, r, int(intervals[r])) for r in range(reps))
        cells.append(block)
    if design.interleaved:
        flat = [c for block in cells for c in block]
        order = [flat[i] for i in rng.permutation(len(flat))]
    else:
        order = [block[i] for block in cells for i in rng.permutation(len(block))]
    return [Trial(i, c, a, r, ref) for i, (c, a, r, ref) in enumerate(order)]


@dataclass(frozen=True)
class ObserverModel:
    """Ground-truth psychometric parameters (aggressiveness %) per condition."""

    mu: dict[str, float]
    sigma: dict[str, float]
    lapse_rate: float = 0.0

    def __post_init__(self):
        if any(s <= 0 for s in self.sigma.values()):
            raise ValueError("observer sigma must be positive")
        if not 0.0 <= self.lapse_rate <= 0.06:
            raise ValueError("lapse_rate must lie in [0, 0.06]")

    def p_correct(self, aggressiveness, condition: str):
        return psychometric(aggressiveness, self.mu[condition], self.sigma[condition],
                            self.lapse_rate)


def simulate_response(aggressiveness: float, observer: ObserverModel, condition: str,
                      rng: np.random.Generator) -> bool:
    """Bernoulli draw: does the observer pick the reference (higher-quality) interval?"""
    return bool(rng.random() < observer.p_correct(aggressiveness, condition))


@dataclass(frozen=True)
class PopulationModel:
    """Distribution of observers' true parameters across a cohort.

    Thresholds are bivariate normal across conditions. The default means and
    sds are the reported group values. The slow/fast correlation of 0.8 makes
    the paired differences, once fitting noise (about 4.5 points per
    threshold under the default design) is added back, as dispersed as a
    paired t of 2.71 over 15 participants implies.
    """

    mu_mean: dict[str, float] = field(default_factory=lambda: {"slow": 74.6, "fast": 82.2})
    mu_sd: dict[str, float] = field(default_factory=lambda: {"slow": 14.8, "fast": 13.1})
    mu_correlation: float = 0.8
    sigma: dict[str, float] = field(default_factory=lambda: {"slow": 10.0, "fast": 10.0})
    lapse_rate: float = 0.0

    def __post_init__(self):
        if not -1.0 <= self.mu_correlation <= 1.0:
            raise ValueError("mu_correlation must lie in [-1, 1]")
        if any(s < 0 for s in self.mu_sd.values()):
            raise ValueError("population sds must be non-negative")

    def draw(self, rng: np.random.Generator, conditions=CONDITIONS) -> ObserverModel:
        conds = list(conditions)
        sd = np.array([self.mu_sd[c] for c in conds])
        corr = np.full((len(conds), len(conds)), self.mu_correlation)
        np.fill_diagonal(corr, 1.0)
        cov = corr * np.outer(sd, sd)
        z = rng.standard_normal(len(conds))
        # cholesky fails on the singular zero-variance / perfect-correlation cases
        w, v = np.linalg.eigh(cov)
        draw = v @ (np.sqrt(np.clip(w, 0.0, None)) * z)
        mu = {c: float(self.mu_mean[c] + draw[i]) for i, c in enumerate(conds)}
        return ObserverModel(mu, {c: float(self.sigma[c]) for c in conds}, self.lapse_rate)

    def to_dict(self) -> dict:
        return {"mu_mean": dict(self.mu_mean), "mu_sd": dict(self.mu_sd),
                "mu_correlation": self.mu_correlation, "sigma": dict(self.sigma),
                "lapse_rate": self.lapse_rate}

    @classmethod
    def from_dict(cls, d: dict) -> "PopulationModel":
        base = cls()
        return cls(dict(d.get("mu_mean", base.mu_mean)), dict(d.get("mu_sd", base.mu_sd)),
                   float(d.get("mu_correlation", base.mu_correlation)),
                   dict(d.get("sigma", base.sigma)), float(d.get("lapse_rate", base.lapse_rate)))


@dataclass(frozen=True)
class TrialRecord:
    participant_id: str
    condition: str
    aggressiveness: float
    reference_interval: int
    response_interval: int
    correct: bool
    trial_index: int


@dataclass(frozen=True)
class StimulusRecord:
    """What the velocity-contingent renderer would have shown in the degraded interval."""

    participant_id: str
    trial_index: int
    condition: str
    degraded_interval: int
    lod_index: int
    lod_triangles: int
    start_azimuth: float
    direction: int
    peak_head_speed: float
    degraded_fraction: float
    switch_count: int
    crossed_threshold: bool


@dataclass(frozen=True)
class StimulusModel:
    """Per-trial stimulus pathway: fixation sweep, head trace, binary LOD schedule.

    `level_triangles` maps aggressiveness % to (chain index, triangle count).
    """

    level_triangles: dict[float, tuple[int, int]]
    peak_speeds: dict[str, float] = field(default_factory=lambda: dict(PEAK_SPEEDS))
    threshold_fraction: float = 0.5
    lag_tau: float = DEFAULT_LAG_TAU
    jitter_sd: float = DEFAULT_JITTER_SD
    sweep_half_range: float = 50.0
    interval_duration: float = 2.5
    sample_rate: float = 90.0

    def run(self, participant: str, trial: Trial, rng: np.random.Generator) -> StimulusRecord:
        start = float(rng.uniform(-self.sweep_half_range, self.sweep_half_range))
        direction = 1 if rng.random() < 0.5 else -1
        peak = self.peak_speeds[trial.condition]
        profile = MotionProfile(trial.condition, peak, self.sweep_half_range,
                                self.interval_duration, self.sample_rate, start, direction)
        head = simulate_head_trace(fixation_trajectory(profile), self.lag_tau,
                                   self.jitter_sd, seed=rng)
        index, tris = self.level_triangles[trial.aggressiveness]
        sched = schedule(head, SchedulerConfig("binary", self.threshold_fraction, peak,
                                               degraded_level_index=index))
        frac = degraded_fraction(sched)
        return StimulusRecord(participant, trial.trial_index, trial.condition,
                              3 - trial.reference_interval, index, tris, start, direction,
                              float(np.max(np.abs(np.gradient(head.azimuth, head.dt)))),
                              frac, sched.switch_count, frac > 0)


def participant_ids(n: int) -> list[str]:
    width = max(2, len(str(n)))
    return [f"P{i:0{width}d}" for i in range(1, n + 1)]


@dataclass
class CohortResult:
    records: list[TrialRecord]
    observers: dict[str, ObserverModel]
    stimulus: list[StimulusRecord] = field(default_factory=list)


def run_cohort(n_participants: int, design: ExperimentDesign,
               population: PopulationModel | None = None, seed: int = 0,
               stimulus: StimulusModel | None = None) -> CohortResult:
    """Simulate every participant's full trial list.

    Each participant gets an independent stream spawned from `seed`: their
    true parameters are drawn first, then their trial order, then responses
    (and stimulus pathways, when a model is supplied, from a separate stream
    so responses do not depend on whether it runs).
    """
    if n_participants < 2:
        raise ValueError("a cohort needs at least 2 participants")
    population = population or PopulationModel()
    streams = np.random.SeedSequence(seed).spawn(n_participants)
    records: list[TrialRecord] = []
    stim_records: list[StimulusRecord] = []
    observers: dict[str, ObserverModel] = {}
    for pid, ss in zip(participant_ids(n_participants), streams):
        param_ss, order_ss, resp_ss, stim_ss = ss.spawn(4)
        observer = population.draw(np.random.default_rng(param_ss), design.conditions)
        observers[pid] = observer
        trials = build_design(design, seed=np.random.default_rng(order_ss))
        rng = np.random.default_rng(resp_ss)
        stim_rng = np.random.default_rng(stim_ss)
        for tr in trials:
            correct = simulate_response(tr.aggressiveness, observer, tr.condition, rng)
            response = tr.reference_interval if correct else 3 - tr.reference_interval
            records.append(TrialRecord(pid, tr.condition, tr.aggressiveness,
                                       tr.reference_interval, response, correct,
                                       tr.trial_index))
            if stimulus is not None:
                stim_records.append(stimulus.run(pid, tr, stim_rng))
    return CohortResult(records, observers, stim_records)


def aggregate(records) -> dict[tuple[str, str], ResponseTable]:
    """Per (participant, condition): trials and correct responses at each level."""
    records = list(records)
    if not records:
        raise ValueError("no trial records to aggregate")
    counts: dict[tuple[str, str], dict[float, list[int]]] = {}
    for r in records:
        cell = counts.setdefault((r.participant_id, r.condition), {})
        nk = cell.setdefault(float(r.aggressiveness), [0, 0])
        nk[0] += 1
        nk[1] += int(r.correct)
    tables = {}
    for (pid, cond), cell in sorted(counts.items()):
        levels = sorted(cell)
        tables[(pid, cond)] = ResponseTable(
            np.array(levels), np.array([cell[a][0] for a in levels]),
            np.array([cell[a][1] for a in levels]), cond, pid)
    return tables
