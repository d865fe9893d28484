"""End-to-end run: gen -> trace -> schedule -> sim run -> fit -> analyze -> report.

Every stage reads its inputs from files written by earlier stages and writes
its own outputs with the run seed and tool version embedded, so each stage
can also be invoked on its own from the command line.
"""

from __future__ import annotations

import dataclasses
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import TOOL_NAME, __version__
from . import io as vio
from .corpus import statue
from .experiment import ExperimentDesign, PopulationModel, StimulusModel, aggregate, run_cohort
from .kinematics import (DEFAULT_JITTER_SD, DEFAULT_LAG_TAU, MotionProfile, fixation_trajectory,
                         simulate_head_trace)
from .mesh import format_obj, load_obj, mean_squared_deviation, metrics
from .psychofit import FitError, cohort_stats, fit
from .report import write_report
from .scheduler import SchedulerConfig, degraded_fraction, schedule
from .simplify import DEFAULT_LADDER, generate_lod_chain

logger = logging.getLogger(__name__)

BUILTIN_STATUE = "builtin:statue"
STAGES = ("gen", "trace", "schedule", "sim", "fit", "analyze", "report")
# share of frames the velocity trigger is expected to degrade during natural rotation
REFERENCE_CLAIM_FRACTION = 0.5


class PipelineError(RuntimeError):
    """A stage failed; `stage` names it and `__cause__` holds the original error."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


# -- configuration -------------------------------------------------------------

@dataclass
class PipelineConfig:
    mesh: str = BUILTIN_STATUE
    ladder: tuple[float, ...] = DEFAULT_LADDER
    deviation_samples: int = 1000
    profiles: dict[str, dict] = field(default_factory=lambda: {"slow": {}, "fast": {}})
    lag_tau: float = DEFAULT_LAG_TAU
    jitter_sd: float = DEFAULT_JITTER_SD
    scheduler: dict = field(default_factory=lambda: {"mode": "binary", "threshold_fraction": 0.5})
    design: ExperimentDesign = field(default_factory=ExperimentDesign)
    n_participants: int = 15
    population: PopulationModel = field(default_factory=PopulationModel)
    stimulus: bool = True
    threshold_p: float = 0.75
    seed: int = 0
    outdir: str = "vclod_out"

    def __post_init__(self):
        self.ladder = tuple(float(a) for a in self.ladder)
        if any(not 0.0 < a < 1.0 for a in self.ladder):
            raise ValueError("ladder entries are fractions in (0, 1)")
        pct = tuple(round(100.0 * a, 6) for a in self.ladder)
        if not set(self.design.aggressiveness_levels) <= set(pct):
            raise ValueError("design aggressiveness levels must be ladder levels (in %)")
        if self.n_participants < 2:
            raise ValueError("n_participants must be >= 2")
        if self.deviation_samples < 1:
            raise ValueError("deviation_samples must be >= 1")
        for cond in self.design.conditions:
            self.motion_profile(cond)
        self.scheduler_config(1.0, 1)

    def motion_profile(self, condition: str) -> MotionProfile:
        return MotionProfile.for_condition(condition, **self.profiles.get(condition, {}))

    def scheduler_config(self, peak: float, top_index: int) -> SchedulerConfig:
        opts = dict(self.scheduler)
        opts.setdefault("degraded_level_index", top_index)
        opts.setdefault("chain_level_count", top_index + 1)
        return SchedulerConfig(reference_peak_speed=peak, **opts)

    def to_dict(self) -> dict:
        return {"mesh": self.mesh, "ladder": list(self.ladder),
                "deviation_samples": self.deviation_samples,
                "profiles": {k: dict(v) for k, v in self.profiles.items()},
                "lag_tau": self.lag_tau, "jitter_sd": self.jitter_sd,
                "scheduler": dict(self.scheduler), "design": self.design.to_dict(),
                "n_participants": self.n_participants, "population": self.population.to_dict(),
                "stimulus": self.stimulus, "threshold_p": self.threshold_p, "seed": self.seed,
                "outdir": self.outdir}

    @classmethod
    def from_dict(cls, d: dict, base_dir=None) -> "PipelineConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kw = dict(d)
        if "design" in kw:
            kw["design"] = ExperimentDesign.from_dict(kw["design"])
        if "population" in kw:
            kw["population"] = PopulationModel.from_dict(kw["population"])
        if "ladder" in kw and "design" not in kw:
            kw["design"] = ExperimentDesign(tuple(round(100.0 * a, 6) for a in kw["ladder"]))
        if base_dir is not None:
            for key in ("mesh", "outdir"):
                if key in kw and kw[key] != BUILTIN_STATUE and not Path(kw[key]).is_absolute():
                    kw[key] = str(Path(base_dir) / kw[key])
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text(encoding="utf-8")), path.parent)


# -- stages --------------------------------------------------------------------

def stage_gen(mesh_path, ladder, outdir, samples: int = 1000, seed: int = 0) -> Path:
    """Write lod_0.obj (reference) .. lod_k.obj and chain.json; returns the manifest path."""
    outdir = Path(outdir)
    if str(mesh_path) == BUILTIN_STATUE:
        mesh = statue()
    else:
        if not Path(mesh_path).is_file():
            raise FileNotFoundError(f"mesh not found: {mesh_path}")
        mesh = load_obj(mesh_path)
    chain = generate_lod_chain(mesh, ladder)
    outdir.mkdir(parents=True, exist_ok=True)
    levels = []
    for i, lvl in enumerate(chain.levels):
        name = f"lod_{i}.obj"
        header = [f"{TOOL_NAME} {__version__} seed={seed}",
                  f"aggressiveness={lvl.aggressiveness:g} triangles={lvl.achieved_triangle_count}"]
        (outdir / name).write_text(format_obj(lvl.mesh, header), encoding="utf-8")
        dev = 0.0 if i == 0 else mean_squared_deviation(lvl.mesh, mesh, samples, seed)
        levels.append({"index": i, "file": name, "aggressiveness": lvl.aggressiveness,
                       "aggressiveness_pct": round(100.0 * lvl.aggressiveness, 6),
                       "target_triangles": lvl.target_triangle_count,
                       "achieved_triangles": lvl.achieved_triangle_count,
                       "reached": lvl.reached, "mean_squared_deviation_m2": dev,
                       "metrics": metrics(lvl.mesh).to_dict()})
    path = outdir / "chain.json"
    vio.write_json(path, {"source": str(mesh_path), "deviation_samples": samples,
                          "levels": levels}, seed)
    return path


def stage_trace(condition: str, seed: int, out, profile_overrides=None,
                lag_tau: float = DEFAULT_LAG_TAU, jitter_sd: float = DEFAULT_JITTER_SD,
                fixation_out=None, stream: int | None = None) -> Path:
    """Head-model trace for one condition (fixation target optionally written too).

    With `stream` set, the jitter comes from an independent child stream of
    `seed`, so several conditions can share one run seed.
    """
    profile = MotionProfile.for_condition(condition, **(profile_overrides or {}))
    target = fixation_trajectory(profile)
    tags = {"condition": profile.condition}
    rng_seed = seed
    if stream is not None:
        tags["stream"] = stream
        rng_seed = np.random.default_rng(np.random.SeedSequence([seed, stream]))
    if fixation_out is not None:
        vio.write_trace(fixation_out, target, seed, source="fixation", **tags)
    head = simulate_head_trace(target, lag_tau, jitter_sd, rng_seed)
    return vio.write_trace(out, head, seed, source="head", **tags)


def stage_schedule(trace_path, out, config: SchedulerConfig) -> Path:
    info, _ = vio.read_csv(trace_path)
    trace = vio.read_trace(trace_path)
    sched = schedule(trace, config)
    return vio.write_schedule(out, sched, vio._seed_of(info), mode=config.mode,
                              threshold=config.threshold_fraction,
                              peak=config.reference_peak_speed)


def ideal_cycle_fraction(profile: MotionProfile, config: SchedulerConfig) -> float:
    """Degraded fraction over exactly one full velocity cycle of the fixation sweep."""
    full = dataclasses.replace(profile, interval_duration=profile.period)
    return degraded_fraction(schedule(fixation_trajectory(full), config))


def level_map(chain_path) -> dict[float, tuple[int, int]]:
    doc = vio.read_json(chain_path)
    return {float(lvl["aggressiveness_pct"]): (int(lvl["index"]), int(lvl["achieved_triangles"]))
            for lvl in doc["levels"] if lvl["index"] > 0}


def stage_sim(design: ExperimentDesign, n_participants: int, seed: int, out,
              population: PopulationModel | None = None, chain_path=None, stimulus_out=None,
              stimulus_options: dict | None = None) -> Path:
    stim = None
    if chain_path is not None:
        stim = StimulusModel(level_map(chain_path), **(stimulus_options or {}))
        missing = set(design.aggressiveness_levels) - set(stim.level_triangles)
        if missing:
            raise ValueError(f"chain has no level for aggressiveness {sorted(missing)}")
    result = run_cohort(n_participants, design, population, seed, stim)
    path = vio.write_trials(out, result.records, seed, participants=n_participants)
    if stim is not None and stimulus_out is not None:
        vio.write_stimulus(stimulus_out, result.stimulus, seed)
    return path


def stage_fit(trials_path, out) -> Path:
    info, records = vio.read_trials(trials_path)
    if not records:
        raise FitError(f"{trials_path}: no trials")
    tables = list(aggregate(records).values())
    fits = [fit(t) for t in tables]
    for f in fits:
        if not f.converged:
            logger.warning("fit %s/%s unconverged: %s", f.participant, f.condition, f.reason)
    return vio.write_fits(out, fits, tables, vio._seed_of(info))


def stage_analyze(fits_path, out, p: float = 0.75) -> Path:
    meta, fits, _ = vio.read_fits(fits_path)
    stats = cohort_stats(fits, p=p)
    return vio.write_json(out, {"statistics": stats.to_dict()}, meta.get("seed"))


def stage_report(fits_path, out, p: float = 0.75) -> Path:
    meta, fits, tables = vio.read_fits(fits_path)
    return write_report(out, fits, tables, p, meta.get("seed"))


# -- driver --------------------------------------------------------------------

def run_pipeline(config: PipelineConfig) -> dict:
    """Run all stages into `config.outdir`; returns the manifest written to manifest.json."""
    out = Path(config.outdir)
    out.mkdir(parents=True, exist_ok=True)
    seed = config.seed
    top = len(config.ladder)
    stage = "gen"
    try:
        chain = stage_gen(config.mesh, config.ladder, out / "chain", config.deviation_samples, seed)

        stage = "trace"
        traces = {}
        for k, cond in enumerate(config.design.conditions):
            traces[cond] = stage_trace(cond, seed, out / f"trace_{cond}.csv",
                                       config.profiles.get(cond), config.lag_tau,
                                       config.jitter_sd, out / f"fixation_{cond}.csv", stream=k)

        stage = "schedule"
        summary = {}
        for cond in config.design.conditions:
            profile = config.motion_profile(cond)
            cfg = config.scheduler_config(profile.peak_speed, top)
            sched = stage_schedule(traces[cond], out / f"schedule_{cond}.csv", cfg)
            fix_sched = schedule(vio.read_trace(out / f"fixation_{cond}.csv"), cfg)
            summary[cond] = {
                "peak_speed_deg_per_s": profile.peak_speed,
                "ideal_full_cycle_fraction": ideal_cycle_fraction(profile, cfg),
                "fixation_interval_fraction": degraded_fraction(fix_sched),
                "head_model_fraction": float(np.mean(vio.read_schedule(sched).level_index > 0)),
            }
        vio.write_json(out / "schedule_summary.json",
                       {"threshold_fraction": config.scheduler_config(1.0, top).threshold_fraction,
                        "analytic_sinusoid_fraction": 2.0 / 3.0,
                        "reference_claim_fraction": REFERENCE_CLAIM_FRACTION,
                        "conditions": summary}, seed)

        stage = "sim"
        vio.write_json(out / "design.json", {"design": config.design.to_dict(),
                                             "population": config.population.to_dict()}, seed)
        stim_opts = {"peak_speeds": {c: config.motion_profile(c).peak_speed
                                     for c in config.design.conditions},
                     "threshold_fraction": config.scheduler_config(1.0, top).threshold_fraction,
                     "lag_tau": config.lag_tau, "jitter_sd": config.jitter_sd}
        trials = stage_sim(config.design, config.n_participants, seed, out / "trials.csv",
                           config.population, chain if config.stimulus else None,
                           out / "stimulus.csv", stim_opts)

        stage = "fit"
        fits = stage_fit(trials, out / "fits.json")
        stage = "analyze"
        stage_analyze(fits, out / "stats.json", config.threshold_p)
        stage = "report"
        stage_report(fits, out / "pf.svg", config.threshold_p)
        vio.write_json(out / "config.json", {"config": config.to_dict()}, seed)
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError(stage, exc) from exc

    files = sorted(p for p in out.rglob("*") if p.is_file() and p.name != "manifest.json")
    manifest = {"meta": vio.meta(seed), "stages": list(STAGES),
                "artifacts": [{"path": p.relative_to(out).as_posix(), "bytes": p.stat().st_size,
                               "sha256": vio.sha256(p)} for p in files]}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return manifest
