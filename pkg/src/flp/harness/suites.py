"""Built-in synthetic scenarios: corridor, office grid, two-floor stairway and open hall."""

from __future__ import annotations

import math
from pathlib import Path

from ..map_core import Beacon, Floor, MapModel, Wall, Zone, ZoneKind, compile_partitions
from .scenario import Prior, Scenario, Waypoint, load_scenario

WALK_SPEED = 1.2
BEACON_AREA = 300.0  # m^2 per beacon


def _floor(index, height, walls, beacons=(), zones=(), bounds=None) -> Floor:
    walls = [w if isinstance(w, Wall) else Wall(*w) for w in walls]
    parts = compile_partitions(walls, zones, bounds=bounds)
    return Floor(index, height, parts, list(beacons), list(zones))


def _hwall(y, x0, x1, doors=(), door_width=1.2):
    """Horizontal wall from x0 to x1 with door gaps centred on ``doors``."""
    out, x = [], x0
    for d in sorted(doors):
        a, b = d - door_width / 2, d + door_width / 2
        if a > x:
            out.append(((x, y), (a, y)))
        x = b
    if x1 > x:
        out.append(((x, y), (x1, y)))
    return out


def _box(x0, y0, x1, y1):
    return [((x0, y0), (x1, y0)), ((x1, y0), (x1, y1)), ((x1, y1), (x0, y1)), ((x0, y1), (x0, y0))]


def beacon_grid(x0, y0, x1, y1, floor=0, area_per_beacon=BEACON_AREA, prefix="b") -> list:
    """Beacons on a regular grid at a density of one per ``area_per_beacon`` square metres."""
    w, h = x1 - x0, y1 - y0
    n = max(1, round(w * h / area_per_beacon))
    nx = max(1, round(math.sqrt(n * w / h)))
    ny = max(1, math.ceil(n / nx))
    out = []
    for j in range(ny):
        for i in range(nx):
            if len(out) == n:
                break
            out.append(Beacon(f"{prefix}{floor}_{len(out)}",
                              (x0 + (i + 0.5) * w / nx, y0 + (j + 0.5) * h / ny), floor))
    return out


def timed_route(points, speed=WALK_SPEED, t0=0.0, floor=0, pauses=None) -> list:
    """Waypoints visiting ``points`` at constant speed; ``pauses`` maps index -> seconds."""
    pauses = pauses or {}
    t = t0
    out = [Waypoint(t, points[0], floor)]
    for i, p in enumerate(points[1:], 1):
        d = math.dist(points[i - 1], p)
        if d > 0:
            t += d / speed
            out.append(Waypoint(t, p, floor))
        if pauses.get(i):
            t += pauses[i]
            out.append(Waypoint(t, p, floor))
    return out


# --- corridor ----------------------------------------------------------------------

def corridor_map(half_length=25.0, branch_x=(9.0, 11.0), branch_len=45.0) -> MapModel:
    """A 2 m wide straight corridor with one branch heading north."""
    bx0, bx1 = branch_x
    walls = [((-half_length, -1.0), (half_length, -1.0)),
             ((-half_length, 1.0), (bx0, 1.0)), ((bx1, 1.0), (half_length, 1.0)),
             ((-half_length, -1.0), (-half_length, 1.0)), ((half_length, -1.0), (half_length, 1.0)),
             ((bx0, 1.0), (bx0, branch_len)), ((bx1, 1.0), (bx1, branch_len)),
             ((bx0, branch_len), (bx1, branch_len))]
    return MapModel([_floor(0, 0.0, walls)], name="corridor")


def corridor_scenario(seed=0, dpc_after_turn=4.0) -> Scenario:
    """Start mid-corridor with unknown heading, turn into the branch, then a 90 degree DPC.

    The start sits 10 m from the branch on either side of the mirror axis
    x = 0 so both walking directions stay plausible until the turn.
    """
    m = corridor_map()
    wps = timed_route([(0.0, 0.0), (10.0, 0.0), (10.0, 40.0)])
    t_turn = wps[1].t
    return Scenario(m, wps, name="corridor", seed=seed, prior=Prior("known_position", 0.3),
                    device_schedule=[(t_turn + dpc_after_turn + 10.0, math.pi / 2)],
                    step_length_noise=0.03, heading_noise=math.radians(2.0), beacon_noise_sigma=4.0)


# --- office ------------------------------------------------------------------------

OFFICE_W, OFFICE_H = 40.0, 30.0
_CORR = (13.0, 17.0)
_ROOM_W = 8.0


def office_map() -> MapModel:
    """40 x 30 m floor: an east-west corridor with five rooms on each side."""
    doors = [_ROOM_W * k + _ROOM_W / 2 for k in range(5)]
    walls = _box(0.0, 0.0, OFFICE_W, OFFICE_H)
    walls += _hwall(_CORR[0], 0.0, OFFICE_W, doors) + _hwall(_CORR[1], 0.0, OFFICE_W, doors)
    for k in range(1, 5):
        x = _ROOM_W * k
        walls += [((x, 0.0), (x, _CORR[0])), ((x, _CORR[1]), (x, OFFICE_H))]
    beacons = beacon_grid(0.0, 0.0, OFFICE_W, OFFICE_H)
    return MapModel([_floor(0, 0.0, walls, beacons)], name="office")


def _office_route(duration=600.0, speed=WALK_SPEED):
    yc = sum(_CORR) / 2
    pts = [(2.0, yc)]
    order = [0, 5, 2, 7, 4, 9, 1, 6, 3, 8]  # rooms: 0-4 south, 5-9 north
    wps = None
    while True:
        for r in order:
            dx = _ROOM_W * (r % 5) + _ROOM_W / 2
            inside = 6.0 if r < 5 else 24.0
            pts += [(dx, yc), (dx, inside), (dx + 2.0, inside), (dx, inside), (dx, yc)]
        wps = timed_route(pts, speed, pauses={i: 3.0 for i in range(3, len(pts), 5)})
        if wps[-1].t >= duration:
            break
    keep = [w for w in wps if w.t < duration]
    last = wps[len(keep)]
    prev = keep[-1]
    u = (duration - prev.t) / (last.t - prev.t)
    end = (prev.position[0] + u * (last.position[0] - prev.position[0]),
           prev.position[1] + u * (last.position[1] - prev.position[1]))
    return keep + [Waypoint(duration, end, 0)]


def office_scenario(seed=0, duration=600.0) -> Scenario:
    """Ten-minute office walk with realistic PDR errors and a device change every two minutes."""
    wps = _office_route(duration)
    dpc = [(t, (math.pi / 2) * (1 if k % 2 == 0 else -1)) for k, t in enumerate(range(90, int(duration), 120))]
    return Scenario(office_map(), wps, name="office", seed=seed, prior=Prior("known_position", 1.0),
                    device_schedule=dpc, beacon_noise_sigma=4.0, step_length_noise=0.05,
                    step_scale_error=0.05, heading_noise=math.radians(3.0),
                    heading_drift=math.radians(0.02))


# --- two floors --------------------------------------------------------------------

STAIR = [(24.0, 2.0), (28.0, 2.0), (28.0, 10.0), (24.0, 10.0)]


def stairway_map(height=3.5) -> MapModel:
    """Two 30 x 20 m floors joined by a stairway in the east; each floor has a split wall."""
    floors = []
    for f in (0, 1):
        exits = [(26.0, 11.0), (22.0, 6.0)] if f == 1 else [(26.0, 1.0), (22.0, 4.0)]
        zone = Zone(STAIR, ZoneKind.STAIRWAY, 0.3, exits)
        walls = _box(0.0, 0.0, 30.0, 20.0) + [((12.0, 0.0), (12.0, 8.0)), ((12.0, 12.0), (12.0, 20.0))]
        beacons = beacon_grid(0.0, 0.0, 30.0, 20.0, floor=f)
        floors.append(_floor(f, f * height, walls, beacons, [zone]))
    return MapModel(floors, name="stairway")


def stairway_scenario(seed=0) -> Scenario:
    a = timed_route([(4.0, 16.0), (4.0, 10.0), (20.0, 10.0), (20.0, 4.0), (25.0, 4.0)])
    t = a[-1].t
    climb = Waypoint(t + 12.0, (27.0, 8.0), 1)
    b = timed_route([(27.0, 8.0), (26.0, 14.0), (16.0, 10.0), (4.0, 10.0), (4.0, 4.0)],
                    t0=climb.t, floor=1)
    return Scenario(stairway_map(), a + [climb] + b[1:], name="stairway", seed=seed,
                    prior=Prior("known_position", 1.0), step_length_noise=0.03,
                    heading_noise=math.radians(2.0))


# --- open hall with mezzanine ------------------------------------------------------

def hall_map() -> MapModel:
    """A 40 x 40 m hall with an entrance gap; floor 1 is a mezzanine strip whose beacons leak down."""
    outer = _hwall(0.0, 0.0, 40.0, doors=(20.0,), door_width=4.0)
    outer += [((40.0, 0.0), (40.0, 40.0)), ((40.0, 40.0), (0.0, 40.0)), ((0.0, 40.0), (0.0, 0.0))]
    ground = _floor(0, 0.0, outer, beacon_grid(0.0, 0.0, 40.0, 40.0, floor=0))
    mezz = _floor(1, 5.0, _box(0.0, 30.0, 40.0, 40.0), beacon_grid(0.0, 30.0, 40.0, 40.0, floor=1))
    return MapModel([ground, mezz], name="hall")


def hall_scenario(seed=0) -> Scenario:
    pts = [(20.0, 1.0), (20.0, 5.0), (35.0, 5.0), (35.0, 25.0), (5.0, 25.0), (5.0, 5.0), (20.0, 5.0),
           (20.0, 1.0)]
    wps = timed_route(pts)
    # GNSS only near the glazed entrance
    t_in = wps[1].t + 10.0
    t_out = wps[-2].t - 10.0
    return Scenario(hall_map(), wps, name="hall", seed=seed, prior=Prior("known_position", 2.0),
                    cross_floor_rss=True, gnss_zones=[(0.0, t_in), (t_out, wps[-1].t)],
                    step_length_noise=0.05, heading_noise=math.radians(3.0),
                    device_schedule=[(60.0, math.pi / 2)])


BUILTIN = {
    "corridor": corridor_scenario,
    "office": office_scenario,
    "stairway": stairway_scenario,
    "hall": hall_scenario,
}


def builtin_suite(name: str) -> list:
    """Scenarios of a built-in suite: one of BUILTIN's names or ``all``."""
    if name == "all":
        return [f() for f in BUILTIN.values()]
    if name not in BUILTIN:
        raise ValueError(f"unknown built-in suite {name!r}; choose from {sorted(BUILTIN)} or 'all'")
    return [BUILTIN[name]()]


def load_suite(ref) -> list:
    """Scenarios from a built-in name or from every ``*.json`` scenario file in a directory."""
    p = Path(ref)
    if p.is_dir():
        files = sorted(p.glob("*.json"))
        out = []
        for f in files:
            doc_text = f.read_text()
            if '"waypoints"' not in doc_text:
                continue  # maps and configs may share the directory
            out.append(load_scenario(f))
        return out
    if p.suffix == ".json" and p.exists():
        return [load_scenario(p)]
    return builtin_suite(str(ref))
