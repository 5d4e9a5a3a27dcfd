"""Wall collision checks for particle displacements.

Candidate walls are pruned in two min/max stages before any exact
intersection test: walls outside the bounding box of the whole batch of
displacements are dropped once, then the rest are bucketed into a uniform
grid and each displacement only tests walls from the cells it covers whose
box overlaps its own box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from numba import njit

from .geometry import Point2, Wall, seg_hit_param

NO_HIT = 0
CORRECTED = 1
KILL = 2


@dataclass(frozen=True)
class CorrectionPolicy:
    enabled: bool = True
    grazing_angle: float = math.radians(20.0)
    wall_margin: float = 0.02
    head_on_fraction: float = 0.8

    @classmethod
    def disabled(cls) -> "CorrectionPolicy":
        return cls(enabled=False)


@dataclass(frozen=True)
class NoHit:
    pass


@dataclass(frozen=True)
class Corrected:
    new_disp: tuple
    wall: Wall


@dataclass(frozen=True)
class Kill:
    wall: Wall


Verdict = Union[NoHit, Corrected, Kill]


@njit(cache=True)
def _first_hit(ax, ay, bx, by, segs, boxes, cand, n_cand, skip):
    """Earliest wall hit by a-b among candidates -> (t, wall index, tests)."""
    lox = min(ax, bx)
    hix = max(ax, bx)
    loy = min(ay, by)
    hiy = max(ay, by)
    best_t = 2.0
    best_j = -1
    tests = 0
    for k in range(n_cand):
        j = cand[k]
        if j == skip:
            continue
        if boxes[j, 0] > hix or boxes[j, 2] < lox or boxes[j, 1] > hiy or boxes[j, 3] < loy:
            continue
        tests += 1
        t = seg_hit_param(ax, ay, bx, by, segs[j, 0], segs[j, 1], segs[j, 2], segs[j, 3])
        if t >= 0.0 and t < best_t:
            best_t = t
            best_j = j
    return best_t, best_j, tests


@njit(cache=True, inline="always")
def _cell_range(lox, hix, loy, hiy, glx, gly, cw, ch, g):
    c0 = min(max(int((lox - glx) / cw), 0), g - 1)
    c1 = min(max(int((hix - glx) / cw), 0), g - 1)
    r0 = min(max(int((loy - gly) / ch), 0), g - 1)
    r1 = min(max(int((hiy - gly) / ch), 0), g - 1)
    return c0, c1, r0, r1


@njit(cache=True)
def collide_kernel(x0, y0, x1, y1, active, segs, boxes, corrections,
                   sin_graze, margin, head_on, out_x, out_y, status, wall_idx):
    """Resolve every active displacement against the walls.

    Writes status (NO_HIT / CORRECTED / KILL), the possibly corrected end
    point and the triggering wall index. Returns the number of exact
    intersection tests performed.
    """
    n = x0.shape[0]
    m = segs.shape[0]
    # stage 1: walls overlapping the box of all active displacements
    glx = np.inf
    gly = np.inf
    ghx = -np.inf
    ghy = -np.inf
    for i in range(n):
        out_x[i] = x1[i]
        out_y[i] = y1[i]
        status[i] = NO_HIT
        wall_idx[i] = -1
        if not active[i]:
            continue
        glx = min(glx, x0[i], x1[i])
        ghx = max(ghx, x0[i], x1[i])
        gly = min(gly, y0[i], y1[i])
        ghy = max(ghy, y0[i], y1[i])
    cand = np.empty(m, dtype=np.int64)
    n_cand = 0
    for j in range(m):
        if boxes[j, 0] > ghx or boxes[j, 2] < glx or boxes[j, 1] > ghy or boxes[j, 3] < gly:
            continue
        cand[n_cand] = j
        n_cand += 1
    every = np.arange(m)

    # stage 2: bucket the surviving walls into a uniform grid over the batch box
    g = max(1, min(64, int(math.sqrt(n_cand)) + 1))
    cw = max((ghx - glx) / g, 1e-9)
    ch = max((ghy - gly) / g, 1e-9)
    counts = np.zeros(g * g + 1, dtype=np.int64)
    for k in range(n_cand):
        j = cand[k]
        c0, c1, r0, r1 = _cell_range(boxes[j, 0], boxes[j, 2], boxes[j, 1], boxes[j, 3], glx, gly, cw, ch, g)
        for r in range(r0, r1 + 1):
            for c in range(c0, c1 + 1):
                counts[r * g + c + 1] += 1
    for c in range(g * g):
        counts[c + 1] += counts[c]
    fill = counts[:-1].copy()
    cells = np.empty(counts[g * g], dtype=np.int64)
    for k in range(n_cand):
        j = cand[k]
        c0, c1, r0, r1 = _cell_range(boxes[j, 0], boxes[j, 2], boxes[j, 1], boxes[j, 3], glx, gly, cw, ch, g)
        for r in range(r0, r1 + 1):
            for c in range(c0, c1 + 1):
                cells[fill[r * g + c]] = j
                fill[r * g + c] += 1
    stamp = np.full(m, -1, dtype=np.int64)

    tests = 0
    for i in range(n):
        if not active[i]:
            continue
        ax = x0[i]
        ay = y0[i]
        bx = x1[i]
        by = y1[i]
        dx = bx - ax
        dy = by - ay
        dl = math.sqrt(dx * dx + dy * dy)
        if dl == 0.0:
            continue
        lox = min(ax, bx)
        hix = max(ax, bx)
        loy = min(ay, by)
        hiy = max(ay, by)
        t = 2.0
        j = -1
        c0, c1, r0, r1 = _cell_range(lox, hix, loy, hiy, glx, gly, cw, ch, g)
        for r in range(r0, r1 + 1):
            for c in range(c0, c1 + 1):
                for q in range(counts[r * g + c], counts[r * g + c + 1]):
                    w = cells[q]
                    if stamp[w] == i:
                        continue
                    stamp[w] = i
                    if boxes[w, 0] > hix or boxes[w, 2] < lox or boxes[w, 1] > hiy or boxes[w, 3] < loy:
                        continue
                    tests += 1
                    tw = seg_hit_param(ax, ay, bx, by, segs[w, 0], segs[w, 1], segs[w, 2], segs[w, 3])
                    # lowest wall index wins an exact tie, independent of visiting order
                    if tw >= 0.0 and (tw < t or (tw == t and w < j)):
                        t = tw
                        j = w
        if j < 0:
            continue
        wall_idx[i] = j
        if not corrections:
            status[i] = KILL
            continue
        wx = segs[j, 2] - segs[j, 0]
        wy = segs[j, 3] - segs[j, 1]
        wl = math.sqrt(wx * wx + wy * wy)
        wx /= wl
        wy /= wl
        ux = dx / dl
        uy = dy / dl
        sin_inc = abs(ux * wy - uy * wx)
        hx = ax + t * dx
        hy = ay + t * dy
        if sin_inc < sin_graze:
            # slide the post-hit remainder along the wall, on the incoming side
            nx = -wy
            ny = wx
            side = (ax - segs[j, 0]) * nx + (ay - segs[j, 1]) * ny
            if side < 0.0 or (side == 0.0 and ux * nx + uy * ny > 0.0):
                nx = -nx
                ny = -ny
            proj = (bx - hx) * wx + (by - hy) * wy
            ex = hx + proj * wx + margin * nx
            ey = hy + proj * wy + margin * ny
        elif t >= head_on:
            keep = max(0.0, t * dl - margin)
            ex = ax + keep * ux
            ey = ay + keep * uy
        else:
            status[i] = KILL
            continue
        # the corrected segment must be clear of every wall
        if ex != ax or ey != ay:
            _, j2, k2 = _first_hit(ax, ay, ex, ey, segs, boxes, every, m, -1)
            tests += k2
            if j2 >= 0:
                status[i] = KILL
                continue
        status[i] = CORRECTED
        out_x[i] = ex
        out_y[i] = ey
    return tests


def collide_arrays(x0, y0, x1, y1, segs, boxes, policy: CorrectionPolicy, active=None):
    """Numpy front-end to the kernel -> (status, end_x, end_y, wall_idx, tests)."""
    n = len(x0)
    if active is None:
        active = np.ones(n, dtype=np.bool_)
    out_x = np.empty(n)
    out_y = np.empty(n)
    status = np.empty(n, dtype=np.int8)
    wall_idx = np.empty(n, dtype=np.int64)
    tests = collide_kernel(np.ascontiguousarray(x0, dtype=np.float64), np.ascontiguousarray(y0, dtype=np.float64),
                           np.ascontiguousarray(x1, dtype=np.float64), np.ascontiguousarray(y1, dtype=np.float64),
                           np.ascontiguousarray(active, dtype=np.bool_), segs, boxes, policy.enabled,
                           math.sin(policy.grazing_angle), policy.wall_margin, policy.head_on_fraction,
                           out_x, out_y, status, wall_idx)
    return status, out_x, out_y, wall_idx, tests


def prune_candidates(disp, partition) -> list:
    """Walls whose bounding box overlaps the displacement's bounding box."""
    (ax, ay), (bx, by) = disp
    lox, hix, loy, hiy = min(ax, bx), max(ax, bx), min(ay, by), max(ay, by)
    b = partition.boxes
    if len(b) == 0:
        return []
    keep = ~((b[:, 0] > hix) | (b[:, 2] < lox) | (b[:, 1] > hiy) | (b[:, 3] < loy))
    return [w for w, k in zip(partition.walls, keep) if k]


def collision_query(disp, partition, policy: CorrectionPolicy = CorrectionPolicy()) -> Verdict:
    (ax, ay), (bx, by) = disp
    if ax == bx and ay == by:
        raise ValueError("displacement must have positive length")
    status, ex, ey, widx, _ = collide_arrays(np.array([ax]), np.array([ay]), np.array([bx]),
                                             np.array([by]), partition.segs, partition.boxes, policy)
    if status[0] == NO_HIT:
        return NoHit()
    wall = partition.walls[widx[0]]
    if status[0] == KILL:
        return Kill(wall)
    return Corrected((Point2(ax, ay), Point2(float(ex[0]), float(ey[0]))), wall)
