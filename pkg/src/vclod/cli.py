"""Command-line front end.

    vclod lod gen --input ref.obj --levels 0.5,0.625 --outdir chains/
    vclod sim trace --condition fast --seed 7 --out trace.csv
    vclod sim schedule --trace trace.csv --mode binary --threshold 0.5 --peak 157 --out schedule.csv
    vclod sim run --design design.json --cohort 15 --seed 42 --out trials.csv
    vclod fit --trials trials.csv --out fits.json
    vclod analyze --fits fits.json --out stats.json
    vclod report --fits fits.json --out pf.svg
    vclod pipeline --config config.json --outdir out/

Exit codes: 0 success, 2 invalid input or arguments, 3 runtime or numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import TOOL_NAME, __version__
from . import io as vio
from .corpus import statue
from .experiment import ExperimentDesign, PopulationModel
from .kinematics import DEFAULT_JITTER_SD, DEFAULT_LAG_TAU, PEAK_SPEEDS
from .mesh import save_obj
from .psychofit import FitError
from .pipeline import (BUILTIN_STATUE, PipelineConfig, PipelineError, run_pipeline, stage_analyze,
                       stage_fit, stage_gen, stage_report, stage_schedule, stage_sim, stage_trace)
from .scheduler import SchedulerConfig
from .simplify import DEFAULT_LADDER

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 2, 3

logger = logging.getLogger(TOOL_NAME)


class UsageError(ValueError):
    pass


def _levels(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")


def _out(args, name: str) -> Path:
    """Explicit --out, else <--outdir>/<name>."""
    if args.out:
        path = Path(args.out)
    elif args.outdir:
        path = Path(args.outdir) / name
    else:
        raise UsageError("--out (or the global --outdir) is required")
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _seed(args, default: int = 0) -> int:
    return default if args.seed is None else args.seed


def _config_dict(args) -> dict:
    if not args.config:
        return {}
    return json.loads(Path(args.config).read_text(encoding="utf-8"))


# -- command handlers ----------------------------------------------------------

def cmd_lod_gen(args) -> int:
    outdir = Path(args.outdir or "chains")
    path = stage_gen(args.input, args.levels, outdir, args.samples, _seed(args))
    logger.info("wrote %s", path)
    return EXIT_OK


def cmd_mesh_statue(args) -> int:
    save_obj(statue(), _out(args, "statue.obj"), [f"{TOOL_NAME} {__version__} statue stand-in"])
    return EXIT_OK


def cmd_sim_trace(args) -> int:
    overrides = {}
    if args.peak_speed is not None:
        overrides["peak_speed"] = args.peak_speed
    if args.duration is not None:
        overrides["interval_duration"] = args.duration
    if args.rate is not None:
        overrides["sample_rate"] = args.rate
    if args.start is not None:
        overrides["start_azimuth"] = args.start
    if args.direction is not None:
        overrides["direction"] = args.direction
    stage_trace(args.condition, _seed(args), _out(args, f"trace_{args.condition}.csv"),
                overrides, args.lag_tau, args.jitter_sd, args.fixation_out)
    return EXIT_OK


def cmd_sim_schedule(args) -> int:
    cfg = SchedulerConfig(args.mode, args.threshold, args.peak, args.degraded_index,
                          args.chain_levels, args.hysteresis)
    stage_schedule(args.trace, _out(args, "schedule.csv"), cfg)
    return EXIT_OK


def cmd_sim_run(args) -> int:
    conf = _config_dict(args)
    design_doc = vio.read_json(args.design) if args.design else conf
    design = ExperimentDesign.from_dict(design_doc.get("design", design_doc))
    population = PopulationModel.from_dict(design_doc.get("population", {}))
    seed = _seed(args, design.seed)
    out = _out(args, "trials.csv")
    stim_out = None
    if args.stimulus:
        stim_out = Path(args.stimulus_out) if args.stimulus_out else out.with_name("stimulus.csv")
    stage_sim(design, args.cohort, seed, out, population, args.stimulus, stim_out)
    return EXIT_OK


def cmd_fit(args) -> int:
    stage_fit(args.trials, _out(args, "fits.json"))
    return EXIT_OK


def cmd_analyze(args) -> int:
    path = stage_analyze(args.fits, _out(args, "stats.json"), args.p)
    s = vio.read_json(path)["statistics"]
    print(f"t({s['degrees_of_freedom']}) = {s['t_statistic']:.4f}, p = {s['p_value']:.4g} "
          f"(one-tailed), n = {s['n_included']}")
    return EXIT_OK


def cmd_report(args) -> int:
    stage_report(args.fits, _out(args, "pf.svg"), args.p)
    return EXIT_OK


def cmd_pipeline(args) -> int:
    conf = _config_dict(args)
    base = Path(args.config).parent if args.config else None
    if args.mesh:
        conf["mesh"] = args.mesh
    if args.seed is not None:
        conf["seed"] = args.seed
    config = PipelineConfig.from_dict(conf, base)
    if args.outdir:
        config.outdir = args.outdir
    manifest = run_pipeline(config)
    for a in manifest["artifacts"]:
        logger.info("%s  %s", a["sha256"][:12], a["path"])
    print(f"{len(manifest['artifacts'])} artifacts in {config.outdir}")
    return EXIT_OK


# -- parser --------------------------------------------------------------------

def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    """Global flags, accepted before or after the subcommand."""
    d = argparse.SUPPRESS if suppress else None
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=d, help="random seed")
    p.add_argument("--config", default=d, help="JSON config file")
    p.add_argument("--outdir", default=d, help="output directory")
    p.add_argument("--verbose", "-v", action="count", default=d if suppress else 0)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=TOOL_NAME, parents=[_global_flags(False)],
                                     description="Velocity-contingent LOD toolkit")
    parser.add_argument("--version", action="version", version=f"{TOOL_NAME} {__version__}")
    g = [_global_flags(True)]
    sub = parser.add_subparsers(dest="command", required=True)

    lod = sub.add_parser("lod", help="LOD chain generation").add_subparsers(dest="sub", required=True)
    p = lod.add_parser("gen", parents=g, help="simplify a mesh into an LOD chain")
    p.add_argument("--input", required=True, help=f"OBJ mesh (or {BUILTIN_STATUE})")
    p.add_argument("--levels", type=_levels, default=DEFAULT_LADDER,
                   help="comma-separated aggressiveness fractions")
    p.add_argument("--samples", type=int, default=1000, help="deviation samples per level")
    p.set_defaults(func=cmd_lod_gen)

    mesh = sub.add_parser("mesh", help="test meshes").add_subparsers(dest="sub", required=True)
    p = mesh.add_parser("statue", parents=g, help="write the 12074-triangle statue stand-in")
    p.add_argument("--out")
    p.set_defaults(func=cmd_mesh_statue)

    sim = sub.add_parser("sim", help="kinematics, scheduling, experiment").add_subparsers(
        dest="sub", required=True)
    p = sim.add_parser("trace", parents=g, help="fixation sweep + head-model trace")
    p.add_argument("--condition", required=True, choices=sorted(PEAK_SPEEDS))
    p.add_argument("--out")
    p.add_argument("--peak-speed", type=float)
    p.add_argument("--duration", type=float, help="interval duration (s)")
    p.add_argument("--rate", type=float, help="sample rate (Hz)")
    p.add_argument("--start", type=float, help="start azimuth (deg)")
    p.add_argument("--direction", type=int, choices=(-1, 1))
    p.add_argument("--lag-tau", type=float, default=DEFAULT_LAG_TAU)
    p.add_argument("--jitter-sd", type=float, default=DEFAULT_JITTER_SD)
    p.add_argument("--fixation-out", help="also write the noiseless fixation trajectory")
    p.set_defaults(func=cmd_sim_trace)

    p = sim.add_parser("schedule", parents=g, help="map a trace to per-sample LOD indices")
    p.add_argument("--trace", required=True)
    p.add_argument("--mode", choices=("binary", "graded"), default="binary")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--peak", type=float, default=PEAK_SPEEDS["fast"])
    p.add_argument("--degraded-index", type=int, default=1)
    p.add_argument("--chain-levels", type=int, default=len(DEFAULT_LADDER) + 1)
    p.add_argument("--hysteresis", type=float, default=0.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sim_schedule)

    p = sim.add_parser("run", parents=g, help="simulate a cohort of 2-IFC observers")
    p.add_argument("--design", help="design JSON (defaults to the 7 x 20 x 2 design)")
    p.add_argument("--cohort", type=int, default=15)
    p.add_argument("--out")
    p.add_argument("--stimulus", metavar="CHAIN_JSON",
                   help="also run and log the per-trial stimulus pathway against this chain")
    p.add_argument("--stimulus-out")
    p.set_defaults(func=cmd_sim_run)

    p = sub.add_parser("fit", parents=g, help="fit psychometric functions")
    p.add_argument("--trials", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit)

    for name, func, default in (("analyze", cmd_analyze, "stats.json"),
                                ("report", cmd_report, "pf.svg")):
        p = sub.add_parser(name, parents=g, help=f"write {default} from fits")
        p.add_argument("--fits", required=True)
        p.add_argument("--out")
        p.add_argument("--p", type=float, default=0.75, help="threshold criterion")
        p.set_defaults(func=func)

    p = sub.add_parser("pipeline", parents=g, help="run every stage end to end")
    p.add_argument("--mesh", help=f"reference OBJ (default {BUILTIN_STATUE})")
    p.set_defaults(func=cmd_pipeline)
    return parser


def _exit_code(exc: BaseException) -> int:
    # unfittable data and singular numerics are runtime failures, not bad input
    if isinstance(exc, (FitError, ArithmeticError, np.linalg.LinAlgError)):
        return EXIT_RUNTIME
    if isinstance(exc, (ValueError, OSError, KeyError)):
        return EXIT_INVALID
    return EXIT_RUNTIME


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose or 0, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except PipelineError as exc:
        print(f"{TOOL_NAME}: error: {exc}", file=sys.stderr)
        return _exit_code(exc.cause)
    except Exception as exc:
        print(f"{TOOL_NAME}: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
