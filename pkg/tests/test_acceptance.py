"""The ten acceptance criteria, each at its stated tolerance and runtime budget.

Every test records one PASS/FAIL line; the lines are printed together in
the pytest terminal summary (and directly when this file is run as a script).
"""

import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from flp.filter import (Engine, FilterConfig, Global, KnownPose, NoiseConfig, UpdateEpoch, Trigger,
                        apply_collisions, apply_dpc, handle_floor_change, init_cloud, kmeans_step,
                        measurement_update, merge_clusters, output_estimate, partial_resample, predict)
from flp.filter.ops import policy_from_config
from flp.harness import BUILTIN, compute_metrics, replay, run_benchmark, synthesize_sensors
from flp.harness.bench import _trace_seed
from flp.harness.oracle import benchmark_partition, naive_crossings, oracle_sweep, pruning_ratio
from flp.harness.scenario import GroundTruth
from flp.map_core import AxisBox, Beacon, Floor, MapModel, Partition, PartitionCache, Point2, Wall
from flp.measurements import GnssFix, RssObservation, rss_from_distance
from flp.pdr import FloorEvent, StepEvent, StepModelParams, step_length

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # run as a script from another directory
    ACCEPTANCE_LINES = []

TWO_PI = 2.0 * math.pi


def record(n: int, title: str, ok: bool, detail: str, elapsed: float, budget: float | None = None):
    within = budget is None or elapsed <= budget
    verdict = "PASS" if ok and within else "FAIL"
    limit = f" (budget {budget:.0f} s)" if budget is not None else ""
    line = f"[{verdict}] criterion {n:>2} {title}: {detail}; {elapsed:.2f} s{limit}"
    ACCEPTANCE_LINES.append((n, line))
    print(line)
    assert ok, line
    assert within, line


def wrap(a):
    return (a + math.pi) % TWO_PI - math.pi


# --- 1 ----------------------------------------------------------------------------

def test_criterion_01_formula_fidelity():
    t0 = time.perf_counter()
    L = step_length(2.0, StepModelParams(user_height=1.8))
    r10, r50 = rss_from_distance(10.0), rss_from_distance(50.0)
    ok = abs(L - 0.808) <= 1e-9 and abs(r10 + 63.4) <= 1e-9 and abs(r50 + 86.9) <= 1e-9
    record(1, "formula fidelity", ok, f"L(2 Hz, 1.8 m) = {L:.12f} m, RSS(10 m) = {r10:.12f}, "
           f"RSS(50 m) = {r50:.12f} dBm", time.perf_counter() - t0, 1.0)


# --- 2 ----------------------------------------------------------------------------

def test_criterion_02_dead_reckoning_identity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    m = MapModel([Floor(0, 0.0, [Partition(0, AxisBox(Point2(-500, -500), Point2(500, 500)), [])])])
    cfg = FilterConfig(n_particles=100, steps_per_epoch=1, epsilon_init_sigma=0.0)
    eng = Engine(m, cfg, KnownPose(0.0, 0.0, beta=0.0), seed=1, noise=NoiseConfig.zero())
    pos = np.zeros(2)
    worst = 0.0
    heading = 0.0
    for k in range(100):
        heading += rng.normal(0.0, 0.4)
        length = rng.uniform(0.4, 0.9)
        pos += length * np.array([math.cos(heading), math.sin(heading)])
        eng.feed(StepEvent(0.5 * (k + 1), length, heading, 1.8))
        e = eng.poll()
        worst = max(worst, math.hypot(e.x - pos[0], e.y - pos[1]))
    record(2, "dead-reckoning identity", worst <= 1e-6, f"max deviation over 100 steps {worst:.2e} m",
           time.perf_counter() - t0, 1.0)


# --- 3 ----------------------------------------------------------------------------

def test_criterion_03_collision_oracle_equivalence():
    t0 = time.perf_counter()
    res = oracle_sweep(10_000, seed=0)
    ratio = pruning_ratio()
    ok = res.disagreements == 0 and res.max_point_error <= 1e-9 and ratio >= 5.0
    record(3, "collision oracle equivalence", ok,
           f"{res.disagreements} disagreements in {res.scenes} scenes ({res.hits} hits), "
           f"max hit-point error {res.max_point_error:.1e} m, pruning {ratio:.0f}x fewer exact tests",
           time.perf_counter() - t0, 30.0)


# --- 4 ----------------------------------------------------------------------------

def _invariant_map(rng):
    walls = []
    while len(walls) < 40:
        a = rng.uniform(-20, 20, 2)
        b = a + rng.uniform(-6, 6, 2)
        if np.hypot(*(b - a)) > 0.5:
            walls.append(Wall(tuple(a), tuple(b)))
    beacons = [Beacon(f"b{i}", tuple(rng.uniform(-20, 20, 2)), 0) for i in range(4)]
    parts = [Partition(i, AxisBox(Point2(x0, y0), Point2(x0 + 25, y0 + 25)),
                       [w for w in walls if w.bbox.overlaps(AxisBox(Point2(x0, y0), Point2(x0 + 25, y0 + 25)))])
             for i, (x0, y0) in enumerate([(-25, -25), (0, -25), (-25, 0), (0, 0)])]
    return MapModel([Floor(0, 0.0, parts, beacons)])


def test_criterion_04_weight_invariants():
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    cfg = FilterConfig(n_particles=500)
    m = _invariant_map(rng)
    walls = m.floor(0).walls
    c = init_cloud(Global(0), cfg, m, seed=4)
    cache = PartitionCache(lambda k: m.floor(k[0]).partition(k[1]), cfg.cache_slots)
    noise = NoiseConfig()
    worst_sum = 0.0
    bad_count = crossings = 0

    def check():
        nonlocal worst_sum, bad_count
        worst_sum = max(worst_sum, abs(c.w.sum() - 1.0))
        bad_count += len(c.x) != cfg.n_particles or len(c.w) != cfg.n_particles

    for k in range(1000):
        ep = UpdateEpoch(rng.uniform(0.2, 3.0), rng.uniform(0, TWO_PI), Trigger.STEP, (), 3, float(k))
        predict(c, ep, noise, m, cfg)
        check()
        apply_collisions(c, m, cache, cfg)
        check()
        live = np.flatnonzero((c.w > 0) & ((c.prev_x != c.x) | (c.prev_y != c.y)))
        crossings += int(naive_crossings(c.prev_x[live], c.prev_y[live], c.x[live], c.y[live], walls).sum())
        b = m.floor(0).beacons[k % 4]
        meas = [RssObservation(float(k), b.id, float(np.clip(rng.normal(-75, 10), -120, 0)))]
        if rng.random() < 0.2:
            meas.append(GnssFix(float(k), tuple(rng.uniform(-20, 20, 2)), 5.0))
        measurement_update(c, meas, m, cfg)
        check()
        partial_resample(c, cfg, m, b if rng.random() < 0.2 else None)
        check()
        if rng.random() < 0.05:
            apply_dpc(c, cfg, rng.uniform(0, TWO_PI), rng.uniform(0, TWO_PI))
            check()
    ok = worst_sum <= 1e-9 and bad_count == 0 and crossings == 0
    record(4, "weight/normalisation invariants", ok,
           f"max |sum w - 1| {worst_sum:.1e} over 1000 epochs, count changes {bad_count}, "
           f"un-corrected live crossings {crossings}", time.perf_counter() - t0, 60.0)


# --- 5 ----------------------------------------------------------------------------

def _corridor_run(seed):
    scn = BUILTIN["corridor"]()
    tr = synthesize_sensors(scn, seed=_trace_seed(scn, seed))
    t_turn = scn.waypoints[1].t
    t_dpc = scn.device_schedule[0][0]
    st = {"n": 0, "bimodal": True, "n_turn": None, "branch": False, "n_dpc": None, "beta": False}

    def observe(eng, item):
        if not isinstance(item, StepEvent):
            return
        st["n"] += 1
        if eng.pending_steps:
            return  # only look at completed epochs
        hyps = eng.hypotheses()
        best = max(hyps, key=lambda h: h.weight)
        if item.t <= t_turn:
            st["bimodal"] &= sum(0.3 <= h.weight <= 0.7 for h in hyps) >= 2
        elif st["n_turn"] is None:
            st["n_turn"] = st["n"]
        if st["n_turn"] is not None and st["n"] - st["n_turn"] <= 10 and item.t < t_dpc:
            # the latest epoch within 10 steps of the turn decides
            truth = tr.truth.position(item.t)
            st["branch"] = math.dist(best.center, truth) < 5.0 and best.center[1] > 1.0
        if item.t >= t_dpc:
            if st["n_dpc"] is None:
                st["n_dpc"] = st["n"]
            if st["n"] - st["n_dpc"] <= 30:
                st["beta"] |= abs(wrap(best.beta - scn.misalignment(item.t))) <= math.radians(10.0)

    replay(scn, tr, seed=seed, observer=observe)
    return st


def test_criterion_05_corridor_ambiguity_and_ma_recovery():
    t0 = time.perf_counter()
    runs = [_corridor_run(s) for s in range(100)]
    bimodal = sum(r["bimodal"] for r in runs)
    branch = sum(r["branch"] for r in runs)
    beta = sum(r["beta"] for r in runs)
    # the first Monte-Carlo run gave 100 / 100 / 100; bimodality has no stated rate, so it
    # shares the 95 % floor of the branch check
    ok = bimodal >= 95 and branch >= 95 and beta >= 90
    record(5, "corridor ambiguity and MA recovery", ok,
           f"bimodal until the turn {bimodal}/100, true branch within 10 steps {branch}/100, "
           f"beta within 10 deg within 30 steps of the DPC {beta}/100", time.perf_counter() - t0, 300.0)


# --- 6 ----------------------------------------------------------------------------

def test_criterion_06_office_suite(tmp_path):
    t0 = time.perf_counter()
    res = run_benchmark([BUILTIN["office"]()], seeds=range(20), out_dir=tmp_path, plots=False)
    (row,) = res.aggregate()
    ok = row["runs"] == 20 and row["RMSE"] <= 5.0 and row["D5"] >= 75.0
    record(6, "office suite, 20 seeds", ok,
           f"mean RMSE {row['RMSE']:.2f} m, mean D5 {row['D5']:.1f} %, mean D10 {row['D10']:.1f} %, "
           f"failed runs {row['failed']}", time.perf_counter() - t0, 600.0)


# --- 7 ----------------------------------------------------------------------------

def test_criterion_07_floor_change():
    t0 = time.perf_counter()
    worst = 1.0
    for seed in range(20):
        scn = BUILTIN["stairway"]()
        tr = synthesize_sensors(scn, seed=_trace_seed(scn, seed))
        st = {"floor": None, "epoch": None, "mass": []}

        def observe(eng, item):
            if isinstance(item, FloorEvent):
                st["floor"], st["epoch"] = item.new_floor, eng.epochs
            if st["floor"] is not None and eng.epochs - st["epoch"] <= 5:
                st["mass"].append(float(eng.cloud.w[eng.cloud.floor == st["floor"]].sum()))

        replay(scn, tr, seed=seed, observer=observe)
        worst = min(worst, max(st["mass"]))

    # exit selection against the exp(-d / lambda) kernel, independently computed
    m = BUILTIN["stairway"]().map
    cfg = FilterConfig(n_particles=1000, exit_spread=1e-3)
    c = init_cloud(KnownPose(18.0, 15.0, floor=0), cfg, m, seed=7)
    handle_floor_change(c, 1, m, cfg)
    exits = np.array(m.floor(1).stairway_zones[0].exit_points)
    d = np.hypot(exits[:, 0] - 18.0, exits[:, 1] - 15.0)
    p = np.exp(-d / cfg.stairway_decay_lambda)
    p /= p.sum()
    chosen = np.argmin(np.hypot(c.x[:, None] - exits[:, 0], c.y[:, None] - exits[:, 1]), axis=1)
    counts = np.bincount(chosen, minlength=len(exits))
    z = np.abs(counts - 1000 * p) / np.sqrt(1000 * p * (1 - p))
    ok = worst >= 0.99 and np.all(z <= 3.0)
    record(7, "floor change", ok,
           f"min weight on the new floor within 5 epochs {worst:.4f} (20 runs); exit counts {counts.tolist()} "
           f"vs expected {np.round(1000 * p, 1).tolist()}, max |z| {z.max():.2f}", time.perf_counter() - t0, 60.0)


# --- 8 ----------------------------------------------------------------------------

def test_criterion_08_metric_correctness():
    t0 = time.perf_counter()
    t = np.arange(600) / 10.0
    truth = GroundTruth(t, np.column_stack([t, np.zeros_like(t)]), np.zeros(len(t), dtype=int))
    est = np.column_stack([t, t, np.full_like(t, 7.0)])
    mr = compute_metrics(est, truth)
    # 65 % of samples within 5 m, the rest at 7 m
    off = np.where(np.arange(len(t)) < 390, 1.0, 7.0)
    m65 = compute_metrics(np.column_stack([t, t, off]), truth)
    ok = (mr.d5 == 0.0 and mr.d10 == 100.0 and abs(mr.rmse - 7.0) <= 1e-12 and mr.verdict.value == "Bad"
          and abs(m65.d5 - 65.0) < 1e-9 and m65.verdict.value == "Good")
    record(8, "metric correctness", ok, f"7 m series: D5 {mr.d5:.0f}, D10 {mr.d10:.0f}, RMSE {mr.rmse:.3f}, "
           f"{mr.verdict.value}; D5 {m65.d5:.1f} % -> {m65.verdict.value}", time.perf_counter() - t0, 1.0)


# --- 9 ----------------------------------------------------------------------------

def test_criterion_09_determinism_and_cache(tmp_path):
    t0 = time.perf_counter()
    suite = [BUILTIN["corridor"](), BUILTIN["stairway"](), BUILTIN["hall"]()]
    for d in ("a", "b"):
        run_benchmark(suite, seeds=range(3), out_dir=tmp_path / d, plots=False)
    same = (tmp_path / "a" / "report.csv").read_bytes() == (tmp_path / "b" / "report.csv").read_bytes()

    rng = np.random.default_rng(9)
    cache = PartitionCache(lambda k: k, slots=5)
    max_res = 0
    bad_evictions = 0
    for _ in range(100_000):
        key = int(rng.integers(0, 15))
        occ = {k: int(rng.integers(0, 4)) for k in rng.choice(15, size=int(rng.integers(0, 10)), replace=False)}
        before = list(cache.resident)
        _, ev = cache.fetch(key, occ)
        if ev is not None:
            low = min(occ.get(k, 0) for k in before)
            bad_evictions += occ.get(ev, 0) != low
        max_res = max(max_res, len(cache))
    ok = same and max_res <= 5 and bad_evictions == 0
    record(9, "determinism and cache", ok,
           f"report.csv identical across runs: {same}; max residents {max_res}; "
           f"evictions not at minimum occupancy {bad_evictions} of 1e5 ops", time.perf_counter() - t0, 30.0)


# --- 10 ---------------------------------------------------------------------------

def test_criterion_10_epoch_budget():
    t0 = time.perf_counter()
    part = benchmark_partition()
    m = MapModel([Floor(0, 0.0, [part], [Beacon("b", (15.0, 15.0), 0)])])
    cfg = FilterConfig(n_particles=1000)
    cloud = init_cloud(Global(0), cfg, m, seed=3)
    cache = PartitionCache(lambda k: m.floor(k[0]).partition(k[1]), cfg.cache_slots)
    policy = policy_from_config(cfg)
    noise = NoiseConfig()
    rng = np.random.default_rng(10)
    clusters = []
    times = []
    for i in range(10_200):
        ep = UpdateEpoch(2.1, rng.uniform(0, TWO_PI), Trigger.STEP, (RssObservation(0.0, "b", -75.0),), 3, float(i))
        s = time.perf_counter()
        predict(cloud, ep, noise, m, cfg)
        apply_collisions(cloud, m, cache, cfg, policy)
        measurement_update(cloud, ep.measurements, m, cfg)
        partial_resample(cloud, cfg, m, None)
        clusters = kmeans_step(cloud, clusters, cfg.n_clusters)
        output_estimate(merge_clusters(clusters, cfg.cluster_merge_radius))
        times.append(time.perf_counter() - s)
    med = float(np.median(times[200:])) * 1e3  # first epochs include JIT warm-up
    record(10, "performance budget", med < 1.0,
           f"median epoch {med:.3f} ms at 1000 particles vs 100 walls over 1e4 epochs "
           f"(p90 {np.percentile(times[200:], 90) * 1e3:.3f} ms)", time.perf_counter() - t0, 60.0)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider", "--rootdir", str(Path(__file__).parent)]))
