"""Planar primitives and the segment-intersection kernel used by collision checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from numba import njit


class Point2(NamedTuple):
    x: float
    y: float


Segment = tuple  # (Point2, Point2)


@dataclass(frozen=True)
class AxisBox:
    min: Point2
    max: Point2

    def __post_init__(self):
        if self.min.x > self.max.x or self.min.y > self.max.y:
            raise ValueError(f"inverted box {self.min} .. {self.max}")

    @classmethod
    def of_points(cls, *pts) -> "AxisBox":
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        return cls(Point2(min(xs), min(ys)), Point2(max(xs), max(ys)))

    @property
    def width(self) -> float:
        return self.max.x - self.min.x

    @property
    def height(self) -> float:
        return self.max.y - self.min.y

    @property
    def area(self) -> float:
        return self.width * self.height

    def contains(self, p) -> bool:
        return self.min.x <= p[0] <= self.max.x and self.min.y <= p[1] <= self.max.y

    def overlaps(self, other: "AxisBox") -> bool:
        return not (other.min.x > self.max.x or other.max.x < self.min.x
                    or other.min.y > self.max.y or other.max.y < self.min.y)

    def as_array(self) -> np.ndarray:
        return np.array([self.min.x, self.min.y, self.max.x, self.max.y])


@dataclass(frozen=True)
class Wall:
    a: Point2
    b: Point2
    bbox: AxisBox = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        a, b = Point2(*map(float, self.a)), Point2(*map(float, self.b))
        if not all(math.isfinite(v) for v in (*a, *b)):
            raise ValueError("wall coordinates must be finite")
        if a == b:
            raise ValueError(f"degenerate wall at {a}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "bbox", AxisBox.of_points(a, b))

    @property
    def length(self) -> float:
        return math.hypot(self.b.x - self.a.x, self.b.y - self.a.y)

    def as_tuple(self):
        return (self.a.x, self.a.y, self.b.x, self.b.y)


def walls_to_arrays(walls) -> tuple[np.ndarray, np.ndarray]:
    """Pack walls as (M, 4) endpoint and (M, 4) bbox arrays for the kernels."""
    if len(walls) == 0:
        return np.zeros((0, 4)), np.zeros((0, 4))
    segs = np.array([w.as_tuple() for w in walls], dtype=np.float64)
    boxes = np.column_stack([
        np.minimum(segs[:, 0], segs[:, 2]), np.minimum(segs[:, 1], segs[:, 3]),
        np.maximum(segs[:, 0], segs[:, 2]), np.maximum(segs[:, 1], segs[:, 3]),
    ])
    return segs, boxes


# relative tolerance for "parallel" and "collinear" decisions
_PAR_EPS = 1e-12


@njit(cache=True)
def seg_hit_param(px0, py0, px1, py1, wx0, wy0, wx1, wy1):
    """Parameter t in [0, 1] along p of the first contact with w, or -1.0.

    Closed segments. Collinear overlap counts as contact at the overlap
    point closest to p's origin.
    """
    rx = px1 - px0
    ry = py1 - py0
    sx = wx1 - wx0
    sy = wy1 - wy0
    qx = wx0 - px0
    qy = wy0 - py0
    denom = rx * sy - ry * sx
    rn = math.sqrt(rx * rx + ry * ry)
    sn = math.sqrt(sx * sx + sy * sy)
    if abs(denom) > _PAR_EPS * rn * sn:
        t = (qx * sy - qy * sx) / denom
        u = (qx * ry - qy * rx) / denom
        if 0.0 <= t <= 1.0 and 0.0 <= u <= 1.0:
            return t
        return -1.0
    # parallel: only collinear overlap can touch
    qn = math.sqrt(qx * qx + qy * qy)
    if abs(qx * ry - qy * rx) > _PAR_EPS * rn * (qn + sn):
        return -1.0
    rr = rx * rx + ry * ry
    t0 = (qx * rx + qy * ry) / rr
    t1 = t0 + (sx * rx + sy * ry) / rr
    lo = min(t0, t1)
    hi = max(t0, t1)
    if hi < -_PAR_EPS or lo > 1.0 + _PAR_EPS:
        return -1.0
    return min(max(lo, 0.0), 1.0)


def segment_intersect(p, w) -> Optional[Point2]:
    """Intersection point of closed segments ``p`` and ``w`` or None.

    >>> segment_intersect(((0, 0), (2, 0)), ((1, -1), (1, 1)))
    Point2(x=1.0, y=0.0)
    """
    (px0, py0), (px1, py1) = p
    (wx0, wy0), (wx1, wy1) = w
    if (px0, py0) == (px1, py1) or (wx0, wy0) == (wx1, wy1):
        raise ValueError("segments must have positive length")
    t = seg_hit_param(float(px0), float(py0), float(px1), float(py1),
                      float(wx0), float(wy0), float(wx1), float(wy1))
    if t < 0.0:
        return None
    return Point2(px0 + t * (px1 - px0), py0 + t * (py1 - py0))


def point_segment_distance(px, py, segs: np.ndarray) -> np.ndarray:
    """Distance from (px, py) to each row of an (M, 4) segment array."""
    ax, ay, bx, by = segs[:, 0], segs[:, 1], segs[:, 2], segs[:, 3]
    dx, dy = bx - ax, by - ay
    ll = dx * dx + dy * dy
    u = np.clip(((px - ax) * dx + (py - ay) * dy) / ll, 0.0, 1.0)
    return np.hypot(ax + u * dx - px, ay + u * dy - py)


def polygon_area(poly) -> float:
    """Signed shoelace area."""
    pts = np.asarray(poly, dtype=float)
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def polygon_is_simple(poly) -> bool:
    n = len(poly)
    if n < 3:
        return False
    edges = [(poly[i], poly[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            # adjacent edges share a vertex by construction
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            if segment_intersect(edges[i], edges[j]) is not None:
                return False
    return True
