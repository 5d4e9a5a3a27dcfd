"""Brute-force reference for wall collisions, independent of the pruned kernel."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np


@dataclass(frozen=True)
class OracleHit:
    hit: bool
    point: tuple | None = None
    t: float | None = None
    wall: int | None = None


def _orient(ax, ay, bx, by, cx, cy):
    v = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    return (v > 0) - (v < 0)


def _on_segment(ax, ay, bx, by, px, py):
    return min(ax, bx) <= px <= max(ax, bx) and min(ay, by) <= py <= max(ay, by)


def _param(ax, ay, bx, by, cx, cy, dx, dy):
    """Exact parameter along a-b of its first contact with c-d (segments known to touch)."""
    rx, ry = bx - ax, by - ay
    sx, sy = dx - cx, dy - cy
    den = rx * sy - ry * sx
    if den != 0:
        return Fraction((cx - ax) * sy - (cy - ay) * sx, den)
    # collinear: earliest of the wall endpoints that lies on a-b, or a itself
    rr = rx * rx + ry * ry
    ts = [Fraction((px - ax) * rx + (py - ay) * ry, rr) for px, py in ((cx, cy), (dx, dy))
          if _on_segment(ax, ay, bx, by, px, py)]
    if _on_segment(cx, cy, dx, dy, ax, ay):
        ts.append(Fraction(0))
    return min(ts)


def _to_ints(values):
    """Scale floats to integers over one power-of-two denominator (exact)."""
    ratios = [float(v).as_integer_ratio() for v in values]
    den = max(d for _, d in ratios)
    return [n * (den // d) for n, d in ratios], den


def naive_collision_oracle(disp, walls) -> OracleHit:
    """Test a displacement against every wall with exact orientation predicates.

    ``walls`` is any iterable of ((x0, y0), (x1, y1)) pairs (``Wall`` works).
    Coordinates are scaled to integers sharing one power-of-two denominator,
    so every predicate is exact. Returns the earliest hit by parametric
    distance along the displacement.
    """
    (ax, ay), (bx, by) = disp
    flat = [ax, ay, bx, by]
    for w in walls:
        (cx, cy), (dx, dy) = (w.a, w.b) if hasattr(w, "a") else w
        flat += [cx, cy, dx, dy]
    ints, den = _to_ints(flat)
    ax, ay, bx, by = ints[:4]
    best = None
    for k in range(len(ints) // 4 - 1):
        cx, cy, dx, dy = ints[4 * k + 4: 4 * k + 8]
        o1 = _orient(ax, ay, bx, by, cx, cy)
        o2 = _orient(ax, ay, bx, by, dx, dy)
        o3 = _orient(cx, cy, dx, dy, ax, ay)
        o4 = _orient(cx, cy, dx, dy, bx, by)
        touch = (o1 != o2 and o3 != o4) or (
            (o1 == 0 and _on_segment(ax, ay, bx, by, cx, cy))
            or (o2 == 0 and _on_segment(ax, ay, bx, by, dx, dy))
            or (o3 == 0 and _on_segment(cx, cy, dx, dy, ax, ay))
            or (o4 == 0 and _on_segment(cx, cy, dx, dy, bx, by)))
        if not touch:
            continue
        t = _param(ax, ay, bx, by, cx, cy, dx, dy)
        if best is None or t < best[0]:
            best = (t, k)
    if best is None:
        return OracleHit(False)
    t, k = best
    px, py = Fraction(ax) + t * (bx - ax), Fraction(ay) + t * (by - ay)
    return OracleHit(True, (float(px / den), float(py / den)), float(t), k)


def naive_crossings(x0, y0, x1, y1, walls) -> np.ndarray:
    """All-pairs float version for audits: True where segment i touches any wall."""
    x0, y0, x1, y1 = (np.asarray(v, dtype=float)[:, None] for v in (x0, y0, x1, y1))
    w = np.array([((*wl.a, *wl.b) if hasattr(wl, "a") else (*wl[0], *wl[1])) for wl in walls], dtype=float)
    if w.size == 0:
        return np.zeros(x0.shape[0], dtype=bool)
    cx, cy, dx, dy = w[:, 0], w[:, 1], w[:, 2], w[:, 3]

    def orient(ax, ay, bx, by, px, py):
        return np.sign((bx - ax) * (py - ay) - (by - ay) * (px - ax))

    def on(ax, ay, bx, by, px, py):
        return ((np.minimum(ax, bx) <= px) & (px <= np.maximum(ax, bx))
                & (np.minimum(ay, by) <= py) & (py <= np.maximum(ay, by)))

    o1 = orient(x0, y0, x1, y1, cx, cy)
    o2 = orient(x0, y0, x1, y1, dx, dy)
    o3 = orient(cx, cy, dx, dy, x0, y0)
    o4 = orient(cx, cy, dx, dy, x1, y1)
    touch = ((o1 != o2) & (o3 != o4)) | (
        ((o1 == 0) & on(x0, y0, x1, y1, cx, cy)) | ((o2 == 0) & on(x0, y0, x1, y1, dx, dy))
        | ((o3 == 0) & on(cx, cy, dx, dy, x0, y0)) | ((o4 == 0) & on(cx, cy, dx, dy, x1, y1)))
    return touch.any(axis=1)


# --- sweeps ------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepResult:
    scenes: int
    hits: int
    disagreements: int
    max_point_error: float


def random_scene(rng: np.random.Generator, max_walls: int = 100):
    """A random displacement and wall set, with snapped coordinates now and then.

    Snapping to a 0.5 m lattice produces touching, collinear and shared-end
    configurations that uniform sampling almost never hits.
    """
    n = int(rng.integers(0, max_walls + 1))
    snap = rng.random() < 0.3
    pts = rng.uniform(-10.0, 10.0, (n, 2))
    ends = pts + rng.uniform(-4.0, 4.0, (n, 2))
    a = rng.uniform(-8.0, 8.0, 2)
    b = a + rng.uniform(-3.0, 3.0, 2)
    if snap:
        pts, ends, a, b = (np.round(v * 2.0) / 2.0 for v in (pts, ends, a, b))
    walls = [(tuple(p), tuple(q)) for p, q in zip(pts, ends) if not np.array_equal(p, q)]
    if np.array_equal(a, b):
        b = a + 0.5
    return (tuple(a), tuple(b)), walls


def oracle_sweep(n_scenes: int = 10_000, seed: int = 0) -> SweepResult:
    """Compare the pruned kernel (corrections off) with the exact oracle on random scenes."""
    from ..map_core import AxisBox, Partition, Point2, Wall
    from ..map_core.collision import KILL, CorrectionPolicy, collide_arrays, seg_hit_param

    rng = np.random.default_rng(seed)
    off = CorrectionPolicy(enabled=False)
    hits = bad = 0
    worst = 0.0
    for _ in range(n_scenes):
        disp, walls = random_scene(rng)
        ref = naive_collision_oracle(disp, walls)
        part = Partition(0, AxisBox(Point2(-20.0, -20.0), Point2(20.0, 20.0)), [Wall(*w) for w in walls])
        (ax, ay), (bx, by) = disp
        status, _, _, widx, _ = collide_arrays(np.array([ax]), np.array([ay]), np.array([bx]), np.array([by]),
                                               part.segs, part.boxes, off)
        killed = status[0] == KILL
        hits += ref.hit
        if killed != ref.hit:
            bad += 1
            continue
        if killed:
            s = part.segs[widx[0]]
            t = seg_hit_param(ax, ay, bx, by, s[0], s[1], s[2], s[3])
            px, py = ax + t * (bx - ax), ay + t * (by - ay)
            worst = max(worst, math.hypot(px - ref.point[0], py - ref.point[1]))
    return SweepResult(n_scenes, hits, bad, worst)


def benchmark_partition(n_walls: int = 100, size: float = 30.0, seed: int = 0):
    """A square partition holding ``n_walls`` short axis-aligned walls."""
    from ..map_core import AxisBox, Partition, Point2, Wall

    rng = np.random.default_rng(seed)
    walls = []
    while len(walls) < n_walls:
        a = rng.uniform(0.0, size, 2)
        ang = rng.choice([0.0, math.pi / 2])
        walls.append(Wall(tuple(a), tuple(a + rng.uniform(1.0, 4.0) * np.array([math.cos(ang), math.sin(ang)]))))
    return Partition(0, AxisBox(Point2(-1.0, -1.0), Point2(size + 1.0, size + 1.0)), walls)


def pruning_ratio(n_particles: int = 1000, step: float = 2.1, epochs: int = 20, seed: int = 0) -> float:
    """All-pairs intersection tests divided by the pruned kernel's, on the 100-wall benchmark."""
    from ..map_core.collision import CorrectionPolicy, collide_arrays

    part = benchmark_partition(seed=seed)
    rng = np.random.default_rng(seed + 1)
    off = CorrectionPolicy(enabled=False)
    pruned = 0
    for _ in range(epochs):
        x0 = rng.uniform(0.0, 30.0, n_particles)
        y0 = rng.uniform(0.0, 30.0, n_particles)
        h = rng.uniform(0.0, 2 * math.pi, n_particles)
        x1, y1 = x0 + step * np.cos(h), y0 + step * np.sin(h)
        pruned += collide_arrays(x0, y0, x1, y1, part.segs, part.boxes, off)[4]
    return epochs * n_particles * len(part.walls) / max(pruned, 1)
