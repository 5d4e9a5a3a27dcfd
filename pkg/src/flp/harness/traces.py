"""On-disk trace format: JSON-lines events plus CSV truth and IMU columns."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict
from pathlib import Path

import numpy as np

from ..measurements import GnssFix, RssObservation
from ..pdr import DpcFlag, FloorEvent, ImuStream, StepEvent
from .scenario import GroundTruth
from .synth import Trace

EVENT_TYPES = {"step": StepEvent, "dpc": DpcFlag, "floor": FloorEvent, "rss": RssObservation,
               "gnss": GnssFix}
_TYPE_NAME = {v: k for k, v in EVENT_TYPES.items()}


def _clean(v):
    # JSON has no NaN; an unknown DPC heading is written as null
    if isinstance(v, float) and math.isnan(v):
        return None
    if isinstance(v, (tuple, list)):
        return [_clean(x) for x in v]
    return v


def event_to_dict(e) -> dict:
    return {"type": _TYPE_NAME[type(e)], **{k: _clean(v) for k, v in asdict(e).items()}}


def event_from_dict(d: dict):
    d = dict(d)
    kind = d.pop("type", None)
    if kind not in EVENT_TYPES:
        raise ValueError(f"unknown event type {kind!r}")
    if kind == "dpc":
        for k in ("heading_before", "heading_after"):
            if d.get(k) is None:
                d[k] = math.nan
    if kind == "gnss":
        d["position"] = tuple(d["position"])
    return EVENT_TYPES[kind](**d)


def write_trace(trace: Trace, out_dir) -> Path:
    """Write ``meta.json``, ``events.jsonl``, ``truth.csv`` and, in IMU mode, ``imu.csv``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta = {"scenario": trace.scenario, "seed": trace.seed, "imu_fs": trace.imu_fs,
            "events": len(trace.events)}
    (out / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    with open(out / "events.jsonl", "w") as fh:
        for e in trace.events:
            fh.write(json.dumps(event_to_dict(e)) + "\n")
    with open(out / "truth.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "x", "y", "floor"])
        for t, (x, y), f in zip(trace.truth.t, trace.truth.xy, trace.truth.floor):
            w.writerow([repr(float(t)), repr(float(x)), repr(float(y)), int(f)])
    if trace.imu is not None:
        s = trace.imu
        cols = np.column_stack([s.t, s.accel, s.gyro, s.pressure])
        np.savetxt(out / "imu.csv", cols, delimiter=",", fmt="%.17g",
                   header="t,ax,ay,az,gx,gy,gz,pressure", comments="")
    return out


def read_trace(in_dir, map_model=None) -> Trace:
    src = Path(in_dir)
    meta = json.loads((src / "meta.json").read_text())
    with open(src / "events.jsonl") as fh:
        events = [event_from_dict(json.loads(line)) for line in fh if line.strip()]
    tr = np.loadtxt(src / "truth.csv", delimiter=",", skiprows=1, ndmin=2)
    truth = GroundTruth(tr[:, 0], tr[:, 1:3], tr[:, 3].astype(int))
    imu = None
    if (src / "imu.csv").exists():
        a = np.loadtxt(src / "imu.csv", delimiter=",", skiprows=1, ndmin=2)
        imu = ImuStream(a[:, 0], a[:, 1:4], a[:, 4:7], a[:, 7])
    return Trace(meta["scenario"], meta["seed"], truth, events, imu, meta.get("imu_fs"), map_model)
