"""JSON interchange for MapModel.

Structural checks run against the bundled JSON schema, semantic ones
(degenerate walls, floor ordering, partition capacity, ...) while the
model is built. Both report the offending source line.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema
import yaml

from .geometry import AxisBox, Point2, Wall
from .model import Beacon, Floor, MapModel, Partition, Zone
from .partition import compile_partitions

DEFAULT_MAX_WALLS = 100


class MapValidationError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None, path: tuple = ()):
        self.line = line
        self.path = tuple(path)
        where = "/".join(str(p) for p in self.path)
        loc = f"line {line}" if line is not None else "unknown line"
        super().__init__(f"{loc} ({where or '<root>'}): {message}")


def map_schema() -> dict:
    return json.loads(resources.files("flp.map_core").joinpath("map.schema.json").read_text())


def _line_of(text: str, path) -> Optional[int]:
    """1-based line of the JSON node at ``path`` (YAML composes JSON with marks)."""
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError:
        return None
    for key in path:
        if isinstance(node, yaml.MappingNode):
            nxt = None
            for k, v in node.value:
                if k.value == key:
                    nxt = v
                    break
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            nxt = node.value[key]
        else:
            nxt = None
        if nxt is None:
            break
        node = nxt
    return node.start_mark.line + 1 if node is not None else None


def parse_map(text: str) -> MapModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MapValidationError(exc.msg, exc.lineno) from exc

    validator = jsonschema.Draft202012Validator(map_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = tuple(err.absolute_path)
        raise MapValidationError(err.message, _line_of(text, path), path)

    path: list = []
    try:
        return _build(doc, path)
    except MapValidationError:
        raise
    except (ValueError, TypeError) as exc:
        raise MapValidationError(str(exc), _line_of(text, path), path) from exc


def load_map(path) -> MapModel:
    return parse_map(Path(path).read_text())


def _build(doc: dict, path: list) -> MapModel:
    # ``path`` is updated in place so the caller can locate failures
    max_walls = doc.get("max_walls_per_partition", DEFAULT_MAX_WALLS)
    floors = []
    path.append("floors")
    for fi, fd in enumerate(doc["floors"]):
        path.append(fi)
        zones = []
        path.append("zones")
        for zi, zd in enumerate(fd.get("zones", [])):
            path.append(zi)
            zones.append(Zone(zd["polygon"], zd["kind"], zd.get("stairway_step_length"),
                              zd.get("exit_points", ()), zd.get("weight_factor", 1.0)))
            path.pop()
        path.pop()

        beacons = []
        path.append("beacons")
        for bi, bd in enumerate(fd.get("beacons", [])):
            path.append(bi)
            beacons.append(Beacon(bd["id"], bd["position"], fd["index"], bd.get("kind", "ble")))
            path.pop()
        path.pop()

        if "partitions" in fd:
            parts = []
            seen = set()
            path.append("partitions")
            for pi, pd in enumerate(fd["partitions"]):
                path.append(pi)
                if pd["id"] in seen:
                    raise ValueError(f"duplicate partition id {pd['id']}")
                seen.add(pd["id"])
                (x0, y0), (x1, y1) = pd["bounds"]
                bounds = AxisBox(Point2(x0, y0), Point2(x1, y1))
                walls = []
                path.append("walls")
                for wi, (a, b) in enumerate(pd["walls"]):
                    path.append(wi)
                    walls.append(Wall(tuple(a), tuple(b)))
                    path.pop()
                path.pop()
                part = Partition(pd["id"], bounds, walls, [z for z in zones if z.bbox.overlaps(bounds)])
                part.check(max_walls)
                parts.append(part)
                path.pop()
            path.pop()
        else:
            path.append("walls")
            walls = []
            for wi, (a, b) in enumerate(fd["walls"]):
                path.append(wi)
                walls.append(Wall(tuple(a), tuple(b)))
                path.pop()
            path.pop()
            parts = compile_partitions(walls, zones, max_walls)
        floors.append(Floor(fd["index"], float(fd["height"]), parts, beacons, zones))
        path.pop()
    path.pop()
    return MapModel(floors, doc.get("name", ""), doc.get("crs_note", "floor-local metres"))


def map_to_dict(model: MapModel) -> dict:
    floors = []
    for f in model.floors:
        floors.append({
            "index": f.index,
            "height": f.height,
            "zones": [_zone_dict(z) for z in f.zones],
            "beacons": [{"id": b.id, "position": list(b.position), "kind": b.kind.value} for b in f.beacons],
            "partitions": [{
                "id": p.id,
                "bounds": [list(p.bounds.min), list(p.bounds.max)],
                "walls": [[list(w.a), list(w.b)] for w in p.walls],
            } for p in f.partitions],
        })
    return {"name": model.name, "crs_note": model.crs_note, "floors": floors}


def _zone_dict(z: Zone) -> dict:
    d = {"kind": z.kind.value, "polygon": [list(p) for p in z.polygon]}
    if z.stairway_step_length is not None:
        d["stairway_step_length"] = z.stairway_step_length
    if z.exit_points:
        d["exit_points"] = [list(p) for p in z.exit_points]
    if z.weight_factor != 1.0:
        d["weight_factor"] = z.weight_factor
    return d


def save_map(model: MapModel, path):
    Path(path).write_text(json.dumps(map_to_dict(model), indent=1))
