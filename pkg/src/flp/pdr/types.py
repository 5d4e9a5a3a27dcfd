from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

GRAVITY = 9.81


class StreamTooShort(ValueError):
    pass


class NotStatic(Exception):
    """Window is not a static phase; keep the previous gyro bias."""


class UnknownFloor(ValueError):
    pass


@dataclass(frozen=True)
class ImuSample:
    t: float
    accel: tuple
    gyro: tuple
    pressure: Optional[float] = None


@dataclass
class ImuStream:
    """Column-oriented sensor stream; ``pressure`` is NaN where absent."""
    t: np.ndarray
    accel: np.ndarray
    gyro: np.ndarray
    pressure: np.ndarray = None

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.accel = np.asarray(self.accel, dtype=float).reshape(-1, 3)
        self.gyro = np.asarray(self.gyro, dtype=float).reshape(-1, 3)
        if self.pressure is None:
            self.pressure = np.full(len(self.t), np.nan)
        self.pressure = np.asarray(self.pressure, dtype=float)
        if not (len(self.t) == len(self.accel) == len(self.gyro) == len(self.pressure)):
            raise ValueError("stream columns differ in length")
        if len(self.t) > 1 and np.any(np.diff(self.t) <= 0):
            raise ValueError("sample times must increase strictly")

    def __len__(self):
        return len(self.t)

    @classmethod
    def from_samples(cls, samples) -> "ImuStream":
        samples = list(samples)
        return cls(
            [s.t for s in samples],
            [s.accel for s in samples],
            [s.gyro for s in samples],
            [np.nan if s.pressure is None else s.pressure for s in samples],
        )

    def samples(self):
        for i in range(len(self.t)):
            p = self.pressure[i]
            yield ImuSample(float(self.t[i]), tuple(self.accel[i]), tuple(self.gyro[i]),
                            None if math.isnan(p) else float(p))

    def slice(self, i0: int, i1: int) -> "ImuStream":
        return ImuStream(self.t[i0:i1], self.accel[i0:i1], self.gyro[i0:i1], self.pressure[i0:i1])

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0]) if len(self.t) else 0.0


def as_stream(stream) -> ImuStream:
    if isinstance(stream, ImuStream):
        return stream
    return ImuStream.from_samples(stream)


@dataclass(frozen=True)
class StepEvent:
    t: float
    length: float
    heading: float
    frequency: float


@dataclass(frozen=True)
class DpcFlag:
    """A device-position-change window; ``t_end`` is None while still open."""
    t_start: float
    t_end: Optional[float]
    heading_before: float = math.nan
    heading_after: float = math.nan

    @property
    def t(self) -> float:
        return self.t_end if self.t_end is not None else self.t_start

    def covers(self, t: float) -> bool:
        return self.t_start <= t and (self.t_end is None or t <= self.t_end)


@dataclass(frozen=True)
class FloorEvent:
    t: float
    delta_altitude: float
    new_floor: int
    latency: float = 0.0


@dataclass
class OrientationState:
    quaternion: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))
    gyro_bias: np.ndarray = field(default_factory=lambda: np.zeros(3))
    heading: float = 0.0
