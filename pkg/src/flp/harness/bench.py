"""Scenario replay through the engine, benchmark batches and their CSV/SVG output."""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..filter import Engine, FilterConfig, Global, KnownPose, KnownPosition, NoiseConfig
from ..pdr import ImuSample
from .metrics import MetricsReport, compute_metrics
from .scenario import Scenario
from .synth import Trace, synthesize_sensors

log = logging.getLogger(__name__)

REPORT_FIELDS = ["scenario", "seed", "D5", "D10", "RMSE", "verdict"]


class EngineFailure(RuntimeError):
    """A run raised inside the engine; the original exception is chained."""


@dataclass
class RunResult:
    scenario: str
    seed: int
    metrics: MetricsReport | None
    estimates: np.ndarray  # rows t, x, y, floor
    trace: Trace | None = None
    error: str | None = None

    @property
    def name(self) -> str:
        return f"{self.scenario}_s{self.seed}"

    def row(self) -> dict:
        if self.metrics is None:
            return {"scenario": self.scenario, "seed": self.seed, "D5": "", "D10": "", "RMSE": "",
                    "verdict": "Error"}
        m = self.metrics
        return {"scenario": self.scenario, "seed": self.seed, "D5": f"{m.d5:.4f}", "D10": f"{m.d10:.4f}",
                "RMSE": f"{m.rmse:.4f}", "verdict": m.verdict.value}


@dataclass
class BenchmarkResult:
    runs: list = field(default_factory=list)

    def aggregate(self) -> list:
        """Per-scenario means over the successful runs, in first-seen order."""
        names = list(dict.fromkeys(r.scenario for r in self.runs))
        table = []
        for name in names:
            ok = [r.metrics for r in self.runs if r.scenario == name and r.metrics is not None]
            failed = sum(1 for r in self.runs if r.scenario == name and r.metrics is None)
            row = {"scenario": name, "runs": len(ok), "failed": failed,
                   "D5": float(np.mean([m.d5 for m in ok])) if ok else math.nan,
                   "D10": float(np.mean([m.d10 for m in ok])) if ok else math.nan,
                   "RMSE": float(np.mean([m.rmse for m in ok])) if ok else math.nan}
            for v in ("Perfect", "Good", "Middle", "Bad"):
                row[v] = sum(1 for m in ok if m.verdict.value == v)
            table.append(row)
        return table

    @property
    def failures(self) -> list:
        return [r for r in self.runs if r.error is not None]


def make_prior(scn: Scenario):
    w = scn.waypoints[0]
    p = scn.prior
    if p.kind == "global":
        return Global(w.floor)
    if p.kind == "known_pose":
        return KnownPose(w.position[0], w.position[1], w.floor, p.sigma, scn.initial_misalignment)
    return KnownPosition(w.position[0], w.position[1], w.floor, p.sigma)


def _imu_samples(trace: Trace):
    s = trace.imu
    for i in range(len(s.t)):
        p = s.pressure[i]
        yield ImuSample(float(s.t[i]), tuple(s.accel[i]), tuple(s.gyro[i]), None if np.isnan(p) else float(p))


def _merged(trace: Trace):
    """Radio events and IMU samples interleaved by time (IMU first on ties)."""
    if trace.imu is None:
        yield from trace.events
        return
    ev = iter(trace.events)
    nxt = next(ev, None)
    for s in _imu_samples(trace):
        while nxt is not None and nxt.t < s.t:
            yield nxt
            nxt = next(ev, None)
        yield s
    while nxt is not None:
        yield nxt
        nxt = next(ev, None)


def replay(scn: Scenario, trace: Trace, config: FilterConfig = FilterConfig(), noise: NoiseConfig = NoiseConfig(),
           seed: int = 0, observer=None) -> tuple[Engine, np.ndarray]:
    """Feed a trace through a fresh engine; returns it and its estimate log.

    ``observer(engine, item)`` is called after every fed item.
    """
    eng = Engine(scn.map, config, make_prior(scn), seed=seed, noise=noise, imu_fs=trace.imu_fs)
    first = eng.poll()
    rows = [(scn.t_start, first.x, first.y, first.floor)]
    for item in _merged(trace):
        eng.feed(item)
        e = eng.poll()
        rows.append((item.t, e.x, e.y, e.floor))
        if observer is not None:
            observer(eng, item)
    eng.flush()
    e = eng.poll()
    rows.append((max(rows[-1][0], e.t), e.x, e.y, e.floor))
    return eng, np.array(rows, dtype=float)


def run_scenario(scn: Scenario, config: FilterConfig = FilterConfig(), noise: NoiseConfig = NoiseConfig(),
                 seed: int = 0, mode: str = "events", keep_trace: bool = False, observer=None) -> RunResult:
    """Synthesise ``scn`` with ``seed``, replay it and score the estimates."""
    trace = synthesize_sensors(scn, seed=_trace_seed(scn, seed), mode=mode)
    try:
        _, est = replay(scn, trace, config, noise, seed, observer)
    except Exception as exc:
        raise EngineFailure(f"{scn.name} seed {seed}: {exc}") from exc
    metrics = compute_metrics(est, trace.truth)
    return RunResult(scn.name, seed, metrics, est, trace if keep_trace else None)


def _trace_seed(scn: Scenario, seed: int) -> int:
    return int(np.random.SeedSequence([scn.seed, seed]).generate_state(1)[0])


def _run_one(args):
    scn, config, noise, seed, mode = args
    try:
        r = run_scenario(scn, config, noise, seed, mode, keep_trace=True)
    except Exception as exc:  # one failing run must not abort the batch
        log.error("run %s seed %d failed: %s", scn.name, seed, exc)
        return RunResult(scn.name, seed, None, np.zeros((0, 4)), None, f"{type(exc).__name__}: {exc}")
    return r


def run_benchmark(scenarios, config: FilterConfig = FilterConfig(), noise: NoiseConfig = NoiseConfig(),
                  seeds=(0,), out_dir=None, mode: str = "events", workers: int = 1,
                  plots: bool = True) -> BenchmarkResult:
    """Run every (scenario, seed) pair and optionally write the report files.

    Files written to ``out_dir``: ``report.csv`` (one row per run),
    ``aggregate.csv`` (per-scenario means), and per run
    ``errors_<run>.csv`` plus ``trajectory_<run>.svg``.
    """
    jobs = [(s, config, noise, int(seed), mode) for s in scenarios for seed in seeds]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as pool:
            runs = list(pool.map(_run_one, jobs))
    else:
        runs = [_run_one(j) for j in jobs]
    result = BenchmarkResult(runs)
    if out_dir is not None:
        write_outputs(result, Path(out_dir), plots)
    for r in runs:
        r.trace = None
    return result


def write_report(runs, path: Path):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, REPORT_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in runs:
            w.writerow(r.row())


def write_aggregate(result: BenchmarkResult, path: Path):
    fields = ["scenario", "runs", "failed", "D5", "D10", "RMSE", "Perfect", "Good", "Middle", "Bad"]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fields, lineterminator="\n")
        w.writeheader()
        for row in result.aggregate():
            w.writerow({k: (f"{v:.4f}" if isinstance(v, float) else v) for k, v in row.items()})


def write_errors(run: RunResult, path: Path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "error"])
        for t, e in run.metrics.error_series:
            w.writerow([f"{t:.3f}", f"{e:.6f}"])


def plot_trajectory(run: RunResult, path: Path):
    """Truth versus estimate over the walls of every floor the truth visits."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    truth = run.trace.truth
    scn_map = run.trace.map_model
    fig, ax = plt.subplots(figsize=(7, 6))
    for f in sorted(set(int(v) for v in truth.floor)):
        segs = scn_map.floor(f).segs
        for x0, y0, x1, y1 in segs:
            ax.plot([x0, x1], [y0, y1], color="0.6", lw=0.8)
    ax.plot(truth.xy[:, 0], truth.xy[:, 1], color="tab:green", lw=1.5, label="ground truth")
    est = run.estimates
    ax.plot(est[:, 1], est[:, 2], color="tab:red", lw=1.0, alpha=0.8, label="estimate")
    ax.set_aspect("equal", adjustable="datalim")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    m = run.metrics
    ax.set_title(f"{run.name}: D5 {m.d5:.0f} %, RMSE {m.rmse:.2f} m")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def write_outputs(result: BenchmarkResult, out: Path, plots: bool = True):
    out.mkdir(parents=True, exist_ok=True)
    write_report(result.runs, out / "report.csv")
    write_aggregate(result, out / "aggregate.csv")
    for r in result.runs:
        if r.metrics is None:
            continue
        write_errors(r, out / f"errors_{r.name}.csv")
        if plots and r.trace is not None:
            plot_trajectory(r, out / f"trajectory_{r.name}.svg")
