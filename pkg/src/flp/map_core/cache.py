"""Bounded partition cache with occupancy-driven eviction."""

from __future__ import annotations

from typing import Callable, Hashable, Mapping, Optional

from .model import LoadFailed, Partition

DEFAULT_SLOTS = 5


class PartitionCache:
    """Keeps at most ``slots`` partitions resident.

    ``loader(key)`` supplies partitions on a miss and should raise (any
    exception) when it cannot; that surfaces as LoadFailed. Keys are
    opaque and orderable; the filter uses ``(floor, partition_id)``.
    """

    def __init__(self, loader: Callable[[Hashable], Partition], slots: int = DEFAULT_SLOTS):
        if slots < 1:
            raise ValueError("cache needs at least one slot")
        self.loader = loader
        self.slots = slots
        self._resident: dict = {}
        self.loads = 0
        self.evictions = 0

    def __contains__(self, key) -> bool:
        return key in self._resident

    def __len__(self) -> int:
        return len(self._resident)

    @property
    def resident(self) -> list:
        return sorted(self._resident)

    def fetch(self, key, occupancy: Mapping = None) -> tuple[Partition, Optional[Hashable]]:
        """Return ``(partition, evicted_key)``.

        On a miss with a full cache the victim is the resident with the
        lowest occupancy (absent from ``occupancy`` counts as empty); ties
        go to the lowest key. The caller must resample the particles of
        the evicted partition.
        """
        if key in self._resident:
            return self._resident[key], None
        occupancy = occupancy or {}
        evicted = None
        if len(self._resident) >= self.slots:
            evicted = min(self._resident, key=lambda k: (occupancy.get(k, 0), k))
        try:
            part = self.loader(key)
        except Exception as exc:
            raise LoadFailed(f"cannot load partition {key!r}: {exc}") from exc
        if evicted is not None:
            del self._resident[evicted]
            self.evictions += 1
        self._resident[key] = part
        self.loads += 1
        return part, evicted

    def clear(self):
        self._resident.clear()


def cache_fetch(cache: PartitionCache, key, occupancy: Mapping = None):
    return cache.fetch(key, occupancy)
