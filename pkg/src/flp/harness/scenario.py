"""Scenario description and piecewise-linear ground truth."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from ..map_core import MapModel, Point2, ZoneKind, load_map

TRUTH_RATE = 10.0
MAX_SPEED = 2.5


class InfeasibleScenario(ValueError):
    """A waypoint leg would require walking faster than MAX_SPEED."""


@dataclass(frozen=True)
class Waypoint:
    t: float
    position: Point2
    floor: int = 0

    def __post_init__(self):
        object.__setattr__(self, "position", Point2(*map(float, self.position)))


@dataclass(frozen=True)
class Prior:
    """How the engine is initialised: ``known_position``, ``known_pose`` or ``global``."""
    kind: str = "known_position"
    sigma: float = 1.0

    def __post_init__(self):
        if self.kind not in ("known_position", "known_pose", "global"):
            raise ValueError(f"unknown prior kind {self.kind!r}")


@dataclass
class Scenario:
    """A scripted walk through a map plus the sensor conditions to synthesise.

    ``device_schedule`` holds (t, change of misalignment in radians) pairs;
    ``gnss_zones`` holds (t_start, t_end) windows with GNSS available.
    """
    map: MapModel
    waypoints: list
    user_height: float = 1.75
    device_schedule: list = field(default_factory=list)
    beacon_noise_sigma: float = 4.0
    gnss_zones: list = field(default_factory=list)
    seed: int = 0
    name: str = "scenario"
    prior: Prior = field(default_factory=Prior)
    initial_misalignment: float = 0.0
    rss_rate: float = 1.0
    rss_floor: float = -100.0
    cross_floor_rss: bool = False
    gnss_sigma: float = 5.0
    gnss_rate: float = 1.0
    step_length_noise: float = 0.0
    step_scale_error: float = 0.0
    heading_noise: float = 0.0
    heading_drift: float = 0.0
    floor_latency: float = 2.0
    dpc_duration: float = 1.0

    def __post_init__(self):
        self.waypoints = [w if isinstance(w, Waypoint) else Waypoint(*w) for w in self.waypoints]
        if len(self.waypoints) < 2:
            raise ValueError("a scenario needs at least two waypoints")
        ts = [w.t for w in self.waypoints]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("waypoint times must increase strictly")
        self.device_schedule = [tuple(map(float, d)) for d in self.device_schedule]
        self.gnss_zones = [tuple(map(float, z)) for z in self.gnss_zones]
        if isinstance(self.prior, dict):
            self.prior = Prior(**self.prior)

    @property
    def t_start(self) -> float:
        return self.waypoints[0].t

    @property
    def t_end(self) -> float:
        return self.waypoints[-1].t

    def check_feasible(self):
        """Raise InfeasibleScenario for a too-fast leg or a level leg crossing a wall."""
        from .oracle import naive_crossings

        for a, b in zip(self.waypoints, self.waypoints[1:]):
            v = math.dist(a.position, b.position) / (b.t - a.t)
            if v > MAX_SPEED:
                raise InfeasibleScenario(f"leg {a.t:.1f}-{b.t:.1f} s needs {v:.2f} m/s (> {MAX_SPEED})")
            if a.floor == b.floor and a.position != b.position:
                walls = self.map.floor(a.floor).walls
                if walls and naive_crossings(np.array([a.position[0]]), np.array([a.position[1]]),
                                             np.array([b.position[0]]), np.array([b.position[1]]),
                                             walls)[0]:
                    raise InfeasibleScenario(f"leg {a.t:.1f}-{b.t:.1f} s crosses a wall")

    def misalignment(self, t: float) -> float:
        return self.initial_misalignment + sum(d for td, d in self.device_schedule if td <= t)


@dataclass(frozen=True)
class GroundTruth:
    t: np.ndarray
    xy: np.ndarray
    floor: np.ndarray

    def __len__(self):
        return len(self.t)

    def position(self, t: float) -> tuple:
        return (float(np.interp(t, self.t, self.xy[:, 0])), float(np.interp(t, self.t, self.xy[:, 1])))


def _in_stairway(mm: MapModel | None, floors, xy) -> np.ndarray:
    inside = np.zeros(len(xy), dtype=bool)
    if mm is None:
        return inside
    for f in floors:
        try:
            inside |= mm.floor(f).in_any_zone(xy, ZoneKind.STAIRWAY)
        except Exception:
            continue
    return inside


def interpolate_ground_truth(waypoints, map_model: MapModel | None = None,
                             rate: float = TRUTH_RATE) -> GroundTruth:
    """Sample the waypoint polyline at ``rate`` Hz.

    On a leg that changes floor, the floor switches to the destination at
    the first sample inside a stairway zone of either floor, or at the
    destination waypoint when no zone is crossed.
    """
    wps = [w if isinstance(w, Waypoint) else Waypoint(*w) for w in waypoints]
    if len(wps) < 2:
        raise ValueError("need at least two waypoints")
    wt = np.array([w.t for w in wps])
    if np.any(np.diff(wt) <= 0):
        raise ValueError("waypoint times must increase strictly")
    n = int(math.floor((wt[-1] - wt[0]) * rate + 1e-9)) + 1
    t = wt[0] + np.arange(n) / rate
    if t[-1] < wt[-1]:
        t = np.append(t, wt[-1])
    wx = np.array([w.position[0] for w in wps])
    wy = np.array([w.position[1] for w in wps])
    xy = np.column_stack([np.interp(t, wt, wx), np.interp(t, wt, wy)])
    seg = np.clip(np.searchsorted(wt, t, side="right") - 1, 0, len(wps) - 2)
    floor = np.array([wps[s].floor for s in seg])
    floor[-1] = wps[-1].floor
    for s in range(len(wps) - 1):
        a, b = wps[s], wps[s + 1]
        if a.floor == b.floor:
            continue
        on = np.flatnonzero(seg == s)
        inside = _in_stairway(map_model, (a.floor, b.floor), xy[on])
        first = on[np.argmax(inside)] if inside.any() else None
        if first is not None:
            floor[on[on >= first]] = b.floor
    # exact waypoint samples keep their own floor
    for w in wps:
        hit = np.flatnonzero(np.isclose(t, w.t, rtol=0, atol=1e-9))
        floor[hit] = w.floor
    return GroundTruth(t, xy, floor)


# --- JSON --------------------------------------------------------------------------

_SIMPLE = [f.name for f in fields(Scenario) if f.name not in ("map", "waypoints", "prior")]


def scenario_to_dict(s: Scenario, map_ref: str | None = None) -> dict:
    doc = {k: getattr(s, k) for k in _SIMPLE}
    doc["device_schedule"] = [list(d) for d in s.device_schedule]
    doc["gnss_zones"] = [list(z) for z in s.gnss_zones]
    doc["waypoints"] = [[w.t, w.position[0], w.position[1], w.floor] for w in s.waypoints]
    doc["prior"] = asdict(s.prior)
    if map_ref is not None:
        doc["map"] = map_ref
    return doc


def scenario_from_dict(doc: dict, map_model: MapModel | None = None, base: Path | None = None) -> Scenario:
    """Build a Scenario; the map comes from ``map_model`` or the ``map`` path in ``doc``."""
    if not isinstance(doc, dict):
        raise ValueError("scenario must be a JSON object")
    unknown = set(doc) - set(_SIMPLE) - {"map", "waypoints", "prior"}
    if unknown:
        raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
    if map_model is None:
        ref = doc.get("map")
        if not ref:
            raise ValueError("scenario has no map reference and none was given")
        path = Path(ref)
        if base is not None and not path.is_absolute():
            path = base / path
        map_model = load_map(path)
    try:
        wps = [Waypoint(float(w[0]), (float(w[1]), float(w[2])), int(w[3]) if len(w) > 3 else 0)
               for w in doc["waypoints"]]
    except (KeyError, TypeError, IndexError, ValueError) as exc:
        raise ValueError(f"bad waypoints: {exc}") from None
    kw = {k: v for k, v in doc.items() if k in _SIMPLE}
    return Scenario(map_model, wps, prior=Prior(**doc.get("prior", {})), **kw)


def load_scenario(path, map_model: MapModel | None = None) -> Scenario:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: {exc}") from None
    return scenario_from_dict(doc, map_model, path.parent)


def save_scenario(s: Scenario, path, map_ref: str | None = None):
    Path(path).write_text(json.dumps(scenario_to_dict(s, map_ref), indent=2))
