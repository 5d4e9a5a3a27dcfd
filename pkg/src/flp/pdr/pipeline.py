"""Chunked sensor front-end turning raw IMU/pressure samples into filter events."""

from __future__ import annotations

import logging

import numpy as np

from .altitude import AltitudeFilter, FloorChangeDetector
from .dpc import DpcDetector
from .orientation import OrientationTracker
from .steps import StepDetector, StepModelParams, step_length
from .types import ImuStream, StepEvent, UnknownFloor, as_stream

log = logging.getLogger(__name__)


class PdrFrontEnd:
    """Streams IMU chunks through orientation, DPC, step and floor detectors.

    ``process`` returns the StepEvent / DpcFlag / FloorEvent objects
    completed by the chunk, ordered by time. Pressure is read from the
    samples that carry it and is assumed to arrive at ``pressure_fs``.
    """

    def __init__(self, fs: float, params: StepModelParams = StepModelParams(),
                 floor_heights=None, current_floor: int = 0, floor_offset: int = 0,
                 pressure_fs: float | None = None):
        self.fs = fs
        self.params = params
        self.orientation = OrientationTracker(fs)
        self.dpc = DpcDetector(fs)
        self.steps = StepDetector(fs)
        self.pressure_fs = pressure_fs
        self.altitude = None
        self.floors = None
        if floor_heights is not None and len(floor_heights) > 1:
            self._floor_args = (list(floor_heights), current_floor, floor_offset)
        else:
            self._floor_args = None

    def process(self, chunk) -> list:
        s = as_stream(chunk)
        if len(s) == 0:
            return []
        events = []
        heading = self.orientation.process(s.t, s.accel, s.gyro)
        flags, in_dpc = self.dpc.process(s.t, s.accel, heading)
        events.extend(flags)
        for t, freq in self.steps.process(s.t, np.linalg.norm(s.accel, axis=1), in_dpc):
            h = float(np.interp(t, s.t, heading)) if s.t[0] <= t else float(heading[0])
            events.append(StepEvent(t, step_length(freq, self.params), h, freq))
        has_p = ~np.isnan(s.pressure)
        if self._floor_args is not None and has_p.any():
            if self.altitude is None:
                fs_p = self.pressure_fs
                if fs_p is None:
                    tp = s.t[has_p]
                    fs_p = 1.0 / float(np.median(np.diff(tp))) if len(tp) > 1 else self.fs
                    self.pressure_fs = fs_p
                self.altitude = AltitudeFilter(fs_p)
                heights, cur, off = self._floor_args
                self.floors = FloorChangeDetector(fs_p, heights, cur, floor_offset=off)
            var = self.altitude.process(s.pressure[has_p])
            try:
                events.extend(self.floors.process(s.t[has_p], var))
            except UnknownFloor as exc:
                log.warning("floor detection ignored: %s", exc)
        events.sort(key=lambda e: e.t)
        return events


def process_stream(stream, fs: float, chunk_seconds: float = 1.0, **kwargs) -> list:
    """Run the front-end over a whole recording in ``chunk_seconds`` pieces."""
    s = as_stream(stream)
    fe = PdrFrontEnd(fs, **kwargs)
    n = max(1, int(round(chunk_seconds * fs)))
    events = []
    for i0 in range(0, len(s), n):
        events.extend(fe.process(s.slice(i0, i0 + n)))
    return events


__all__ = ["ImuStream", "PdrFrontEnd", "process_stream"]
