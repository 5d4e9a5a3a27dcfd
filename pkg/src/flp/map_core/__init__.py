"""Negative map: geometry, partitions, collision queries and the partition cache."""

from .cache import DEFAULT_SLOTS, PartitionCache, cache_fetch
from .collision import (CORRECTED, KILL, NO_HIT, Corrected, CorrectionPolicy, Kill, NoHit,
                        collide_arrays, collision_query, prune_candidates)
from .geometry import AxisBox, Point2, Wall, segment_intersect
from .io import MapValidationError, load_map, map_to_dict, parse_map, save_map
from .model import (Beacon, BeaconKind, Floor, LoadFailed, MapError, MapModel, OutOfMap, Partition,
                    SinglePointOverflow, Zone, ZoneKind)
from .partition import compile_partitions, locate, locate_many

__all__ = [
    "AxisBox", "Beacon", "BeaconKind", "CORRECTED", "Corrected", "CorrectionPolicy", "DEFAULT_SLOTS",
    "Floor", "KILL", "Kill", "LoadFailed", "MapError", "MapModel", "MapValidationError", "NO_HIT",
    "NoHit", "OutOfMap", "Partition", "PartitionCache", "Point2", "SinglePointOverflow", "Wall", "Zone",
    "ZoneKind", "cache_fetch", "collide_arrays", "collision_query", "compile_partitions", "load_map",
    "locate", "locate_many", "map_to_dict", "parse_map", "prune_candidates", "save_map",
    "segment_intersect",
]
