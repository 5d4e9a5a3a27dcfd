"""Floor partitioning by recursive bisection, and point -> partition lookup."""

from __future__ import annotations

from collections import Counter

import numpy as np

from .geometry import AxisBox, Point2, seg_hit_param
from .model import OutOfMap, Partition, SinglePointOverflow

MIN_PARTITION_AREA = 10.0
MAX_PARTITION_AREA = 1000.0
_MIN_CELL_SIDE = 1e-6


def segment_touches_box(a, b, box: AxisBox) -> bool:
    """True iff the closed segment a-b meets the closed box."""
    if box.contains(a) or box.contains(b):
        return True
    if not AxisBox.of_points(a, b).overlaps(box):
        return False
    x0, y0, x1, y1 = box.min.x, box.min.y, box.max.x, box.max.y
    edges = ((x0, y0, x1, y0), (x1, y0, x1, y1), (x1, y1, x0, y1), (x0, y1, x0, y0))
    for ex0, ey0, ex1, ey1 in edges:
        if ex0 == ex1 and ey0 == ey1:
            continue
        if seg_hit_param(a[0], a[1], b[0], b[1], ex0, ey0, ex1, ey1) >= 0.0:
            return True
    return False


def _check_shared_points(walls, max_walls):
    counts = Counter()
    for w in walls:
        counts[w.a] += 1
        counts[w.b] += 1
    if counts:
        pt, n = counts.most_common(1)[0]
        if n > max_walls:
            raise SinglePointOverflow(f"{n} walls meet at {pt}; cannot split below {max_walls}")


def compile_partitions(walls, zones=(), max_walls: int = 100,
                       target_area: float = MAX_PARTITION_AREA, bounds: AxisBox | None = None,
                       margin: float = 1.0) -> list:
    """Split the floor bounding box until every cell has <= max_walls walls.

    Cells are also split while larger than ``target_area`` as long as both
    halves stay above MIN_PARTITION_AREA. Walls crossing a cut go to both
    cells. Partition ids follow depth-first order.
    """
    if max_walls < 1:
        raise ValueError("max_walls must be >= 1")
    walls = list(walls)
    zones = list(zones)
    _check_shared_points(walls, max_walls)
    if bounds is None:
        pts = [p for w in walls for p in (w.a, w.b)] + [p for z in zones for p in z.polygon]
        if not pts:
            raise ValueError("cannot infer bounds of an empty floor")
        box = AxisBox.of_points(*pts)
        bounds = AxisBox(Point2(box.min.x - margin, box.min.y - margin),
                         Point2(box.max.x + margin, box.max.y + margin))

    cells = []

    def split(box: AxisBox, members: list):
        too_many = len(members) > max_walls
        too_big = box.area > target_area and box.area / 2 >= MIN_PARTITION_AREA
        if not (too_many or too_big):
            cells.append((box, members))
            return
        if too_many and max(box.width, box.height) < _MIN_CELL_SIDE:
            raise SinglePointOverflow(f"{len(members)} walls converge inside {box}")
        if box.width >= box.height:
            mid = 0.5 * (box.min.x + box.max.x)
            halves = (AxisBox(box.min, Point2(mid, box.max.y)), AxisBox(Point2(mid, box.min.y), box.max))
        else:
            mid = 0.5 * (box.min.y + box.max.y)
            halves = (AxisBox(box.min, Point2(box.max.x, mid)), AxisBox(Point2(box.min.x, mid), box.max))
        for h in halves:
            split(h, [w for w in members if segment_touches_box(w.a, w.b, h)])

    split(bounds, walls)
    parts = []
    for pid, (box, members) in enumerate(cells):
        pz = [z for z in zones if z.bbox.overlaps(box)]
        parts.append(Partition(pid, box, members, pz))
    return parts


def locate(point, floor) -> int:
    """Id of the partition containing ``point`` (lowest id on shared edges)."""
    ids = locate_many(np.array([[point[0], point[1]]], dtype=float), floor)
    if ids[0] < 0:
        raise OutOfMap(f"{tuple(point)} is outside floor {floor.index}")
    return int(ids[0])


def locate_many(xy: np.ndarray, floor) -> np.ndarray:
    """Vectorised locate; -1 marks points outside every partition."""
    b = floor.bounds_array
    ids = np.array([p.id for p in floor.partitions])
    order = np.argsort(ids, kind="stable")
    b, ids = b[order], ids[order]
    x = xy[:, 0:1]
    y = xy[:, 1:2]
    inside = (x >= b[:, 0]) & (x <= b[:, 2]) & (y >= b[:, 1]) & (y <= b[:, 3])
    hit = inside.any(axis=1)
    first = np.argmax(inside, axis=1)
    return np.where(hit, ids[first], -1)
