"""Negative-map data model: map -> floors -> partitions (walls, zones), beacons."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from matplotlib.path import Path

from .geometry import AxisBox, Point2, Wall, polygon_area, polygon_is_simple, walls_to_arrays


class MapError(Exception):
    """Base for map construction and lookup failures."""


class OutOfMap(MapError):
    pass


class SinglePointOverflow(MapError):
    pass


class LoadFailed(MapError):
    pass


class ZoneKind(str, enum.Enum):
    STAIRWAY = "stairway"
    HIGH_ACCESSIBILITY = "high_accessibility"
    GNSS_DENIED = "gnss_denied"


class BeaconKind(str, enum.Enum):
    WIFI = "wifi"
    BLE = "ble"


@dataclass(frozen=True)
class Zone:
    polygon: tuple
    kind: ZoneKind
    stairway_step_length: Optional[float] = None
    exit_points: tuple = ()
    weight_factor: float = 1.0
    path: Path = field(init=False, repr=False, compare=False)
    bbox: AxisBox = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        poly = tuple(Point2(float(x), float(y)) for x, y in self.polygon)
        kind = ZoneKind(self.kind)
        object.__setattr__(self, "polygon", poly)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "exit_points", tuple(Point2(*map(float, p)) for p in self.exit_points))
        if abs(polygon_area(poly)) <= 0 or not polygon_is_simple(poly):
            raise ValueError("zone polygon must be simple with positive area")
        if kind is ZoneKind.STAIRWAY:
            if self.stairway_step_length is None or not self.stairway_step_length > 0:
                raise ValueError("stairway zone needs stairway_step_length > 0")
            if not self.exit_points:
                raise ValueError("stairway zone needs at least one exit point")
        elif self.stairway_step_length is not None:
            raise ValueError("stairway_step_length only allowed on stairway zones")
        if self.weight_factor < 0:
            raise ValueError("weight_factor must be >= 0")
        object.__setattr__(self, "path", Path(np.array(poly + (poly[0],)), closed=True))
        object.__setattr__(self, "bbox", AxisBox.of_points(*poly))

    def contains(self, xy: np.ndarray) -> np.ndarray:
        """Vectorised point-in-polygon for an (N, 2) array."""
        xy = np.atleast_2d(xy)
        b = self.bbox
        inside = ((xy[:, 0] >= b.min.x) & (xy[:, 0] <= b.max.x)
                  & (xy[:, 1] >= b.min.y) & (xy[:, 1] <= b.max.y))
        if inside.any():
            inside[inside] = self.path.contains_points(xy[inside])
        return inside


@dataclass(frozen=True)
class Beacon:
    id: str
    position: Point2
    floor: int
    kind: BeaconKind = BeaconKind.BLE

    def __post_init__(self):
        object.__setattr__(self, "position", Point2(*map(float, self.position)))
        object.__setattr__(self, "kind", BeaconKind(self.kind))


@dataclass
class Partition:
    id: int
    bounds: AxisBox
    walls: list
    zones: list = field(default_factory=list)

    def __post_init__(self):
        self.segs, self.boxes = walls_to_arrays(self.walls)

    def check(self, max_walls: int = 100):
        if len(self.walls) > max_walls:
            raise ValueError(f"partition {self.id} holds {len(self.walls)} walls (> {max_walls})")
        for w in self.walls:
            if not w.bbox.overlaps(self.bounds):
                raise ValueError(f"wall {w} lies outside partition {self.id} bounds")


@dataclass
class Floor:
    index: int
    height: float
    partitions: list
    beacons: list = field(default_factory=list)
    zones: list = field(default_factory=list)

    def __post_init__(self):
        if self.partitions:
            self.bounds_array = np.array([p.bounds.as_array() for p in self.partitions])
        else:
            self.bounds_array = np.zeros((0, 4))
        seen = {}
        for p in self.partitions:
            for w in p.walls:
                seen.setdefault(w, None)
        self.walls = list(seen)
        self.segs, self.boxes = walls_to_arrays(self.walls)
        index = {w: i for i, w in enumerate(self.walls)}
        for p in self.partitions:
            # rows of this floor's segs/boxes belonging to the partition
            p.wall_idx = np.array([index[w] for w in p.walls], dtype=np.int64)
        self._by_id = {p.id: p for p in self.partitions}

    @property
    def stairway_zones(self) -> list:
        return [z for z in self.zones if z.kind is ZoneKind.STAIRWAY]

    def zones_of(self, kind: ZoneKind) -> list:
        return [z for z in self.zones if z.kind is kind]

    @property
    def bounds(self) -> AxisBox:
        b = self.bounds_array
        return AxisBox(Point2(b[:, 0].min(), b[:, 1].min()), Point2(b[:, 2].max(), b[:, 3].max()))

    def partition(self, pid: int) -> Partition:
        try:
            return self._by_id[pid]
        except KeyError:
            raise LoadFailed(f"floor {self.index} has no partition {pid}") from None

    def in_any_zone(self, xy: np.ndarray, kind: ZoneKind) -> np.ndarray:
        mask = np.zeros(len(xy), dtype=bool)
        for z in self.zones:
            if z.kind is kind:
                mask |= z.contains(xy)
        return mask


@dataclass
class MapModel:
    floors: list
    name: str = ""
    crs_note: str = "floor-local metres"

    def __post_init__(self):
        idx = [f.index for f in self.floors]
        if not idx:
            raise ValueError("map needs at least one floor")
        if idx != list(range(idx[0], idx[0] + len(idx))):
            raise ValueError(f"floor indices must be contiguous and ordered, got {idx}")
        heights = [f.height for f in self.floors]
        if any(b <= a for a, b in zip(heights, heights[1:])):
            raise ValueError("floor heights must increase strictly with index")
        ids = [b.id for f in self.floors for b in f.beacons]
        if len(ids) != len(set(ids)):
            raise ValueError("beacon ids must be unique")
        self._beacons = {b.id: b for f in self.floors for b in f.beacons}
        self._floors = {f.index: f for f in self.floors}

    def floor(self, index: int) -> Floor:
        try:
            return self._floors[index]
        except KeyError:
            raise OutOfMap(f"no floor {index}") from None

    def beacon(self, beacon_id: str) -> Beacon:
        return self._beacons[beacon_id]

    @property
    def beacons(self) -> dict:
        return self._beacons

    @property
    def floor_heights(self) -> list:
        return [f.height for f in self.floors]

    def translated(self, dx: float, dy: float) -> "MapModel":
        """Rigidly shifted copy (used by equivariance checks)."""
        def sh(p):
            return (p[0] + dx, p[1] + dy)

        floors = []
        for f in self.floors:
            zones = [Zone([sh(p) for p in z.polygon], z.kind, z.stairway_step_length,
                          [sh(p) for p in z.exit_points], z.weight_factor) for z in f.zones]
            parts = []
            for p in f.partitions:
                b = p.bounds
                parts.append(Partition(p.id, AxisBox(Point2(*sh(b.min)), Point2(*sh(b.max))),
                                       [Wall(sh(w.a), sh(w.b)) for w in p.walls],
                                       [zones[f.zones.index(z)] for z in p.zones]))
            beacons = [Beacon(b.id, sh(b.position), b.floor, b.kind) for b in f.beacons]
            floors.append(Floor(f.index, f.height, parts, beacons, zones))
        return MapModel(floors, self.name, self.crs_note)


def min_floor_gap(heights) -> float:
    gaps = np.diff(np.asarray(heights, dtype=float))
    return float(gaps.min()) if len(gaps) else math.inf
