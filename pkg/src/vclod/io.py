"""CSV / JSON persistence with tool-version and seed metadata."""

from __future__ import annotations

import csv
import hashlib
import io
import json
from pathlib import Path

import numpy as np

from . import TOOL_NAME, __version__
from .experiment import StimulusRecord, TrialRecord
from .kinematics import KinematicTrace
from .psychofit import PsychometricFit, ResponseTable
from .scheduler import LodSchedule

TRACE_COLUMNS = ("t_s", "azimuth_deg", "speed_deg_per_s")
SCHEDULE_COLUMNS = ("t_s", "level_index")
TRIAL_COLUMNS = ("participant", "condition", "trial", "aggressiveness_pct", "ref_interval",
                 "response", "correct")
STIMULUS_COLUMNS = ("participant", "trial", "condition", "degraded_interval", "lod_index",
                    "lod_triangles", "start_azimuth_deg", "direction", "peak_head_speed_deg_per_s",
                    "degraded_fraction", "switch_count", "crossed_threshold")


def meta(seed, **extra) -> dict:
    out = {"tool": TOOL_NAME, "version": __version__, "seed": seed}
    out.update(extra)
    return out


def header_line(seed, **extra) -> str:
    parts = [f"{TOOL_NAME} {__version__}", f"seed={seed}"]
    parts += [f"{k}={v}" for k, v in extra.items()]
    return "# " + " ".join(parts)


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, columns, rows, seed, **extra) -> Path:
    buf = io.StringIO()
    buf.write(header_line(seed, **extra) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    path = Path(path)
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def read_csv(path) -> tuple[dict, list[dict]]:
    """Rows as dicts plus metadata parsed from the leading comment line."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    info: dict = {}
    body = []
    for line in lines:
        if line.startswith("#"):
            for token in line[1:].split():
                if "=" in token:
                    k, v = token.split("=", 1)
                    info[k] = v
            continue
        body.append(line)
    return info, list(csv.DictReader(body))


def write_json(path, payload: dict, seed, **extra) -> Path:
    doc = {"meta": meta(seed, **extra)}
    doc.update(payload)
    path = Path(path)
    path.write_text(json.dumps(doc, indent=2, allow_nan=False) + "\n", encoding="utf-8")
    return path


def read_json(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _seed_of(info: dict):
    s = info.get("seed")
    try:
        return int(s)
    except (TypeError, ValueError):
        return s


# -- typed wrappers ------------------------------------------------------------

def write_trace(path, trace: KinematicTrace, seed, **extra) -> Path:
    rows = zip(trace.timestamps.tolist(), trace.azimuth.tolist(), trace.derived_speed.tolist())
    return write_csv(path, TRACE_COLUMNS, rows, seed, **extra)


def read_trace(path) -> KinematicTrace:
    _, rows = read_csv(path)
    if not rows:
        raise ValueError(f"{path}: trace has no samples")
    t = np.array([float(r["t_s"]) for r in rows])
    a = np.array([float(r["azimuth_deg"]) for r in rows])
    return KinematicTrace(t, a)


def write_schedule(path, sched: LodSchedule, seed, **extra) -> Path:
    rows = zip(sched.timestamps.tolist(), sched.level_index.tolist())
    return write_csv(path, SCHEDULE_COLUMNS, rows, seed, **extra)


def read_schedule(path) -> LodSchedule:
    _, rows = read_csv(path)
    return LodSchedule(np.array([float(r["t_s"]) for r in rows]),
                       np.array([int(r["level_index"]) for r in rows], dtype=np.int64))


def write_trials(path, records, seed, **extra) -> Path:
    rows = ((r.participant_id, r.condition, r.trial_index, r.aggressiveness,
             r.reference_interval, r.response_interval, r.correct) for r in records)
    return write_csv(path, TRIAL_COLUMNS, rows, seed, **extra)


def read_trials(path) -> tuple[dict, list[TrialRecord]]:
    info, rows = read_csv(path)
    missing = set(TRIAL_COLUMNS) - set(rows[0].keys() if rows else TRIAL_COLUMNS)
    if missing:
        raise ValueError(f"{path}: missing columns {sorted(missing)}")
    recs = [TrialRecord(r["participant"], r["condition"], float(r["aggressiveness_pct"]),
                        int(r["ref_interval"]), int(r["response"]), r["correct"] in ("1", "True"),
                        int(r["trial"])) for r in rows]
    return info, recs


def write_stimulus(path, records: list[StimulusRecord], seed, **extra) -> Path:
    rows = ((s.participant_id, s.trial_index, s.condition, s.degraded_interval, s.lod_index,
             s.lod_triangles, s.start_azimuth, s.direction, s.peak_head_speed,
             s.degraded_fraction, s.switch_count, s.crossed_threshold) for s in records)
    return write_csv(path, STIMULUS_COLUMNS, rows, seed, **extra)


def table_to_dict(t: ResponseTable) -> dict:
    return {"participant": t.participant, "condition": t.condition,
            "aggressiveness_pct": t.levels.tolist(), "n_trials": t.n_trials.tolist(),
            "n_correct": t.n_correct.tolist()}


def table_from_dict(d: dict) -> ResponseTable:
    return ResponseTable(d["aggressiveness_pct"], d["n_trials"], d["n_correct"],
                         d.get("condition", ""), d.get("participant", ""))


def write_fits(path, fits: list[PsychometricFit], tables: list[ResponseTable], seed,
               **extra) -> Path:
    return write_json(path, {"model": "0.5 + 0.5 * Phi((a - mu) / sigma)",
                             "fits": [f.to_dict() for f in fits],
                             "tables": [table_to_dict(t) for t in tables]}, seed, **extra)


def read_fits(path) -> tuple[dict, list[PsychometricFit], list[ResponseTable]]:
    doc = read_json(path)
    return (doc.get("meta", {}), [PsychometricFit.from_dict(d) for d in doc["fits"]],
            [table_from_dict(d) for d in doc.get("tables", [])])
