"""Device-position-change detection from the body-frame vertical."""

from __future__ import annotations

import math
from collections import deque

import numpy as np

from .types import DpcFlag, as_stream

RAISE_ANGLE = math.radians(20.0)
SETTLE_STD = math.radians(2.0)


def dpc_angle(z_ref, z) -> float:
    """Angle between two unit verticals from the norm of their cross product."""
    c = np.cross(np.asarray(z_ref, dtype=float), np.asarray(z, dtype=float))
    return math.asin(min(1.0, float(np.linalg.norm(c))))


class DpcDetector:
    """Streaming detector.

    The vertical is the normalised trailing 1 s mean of the accelerometer.
    A window opens when its angle to the recorded reference exceeds
    ``raise_angle`` and closes once that angle has a standard deviation
    below ``settle_std`` over the last ``window`` seconds; the current
    vertical then becomes the new reference.
    """

    def __init__(self, fs: float, window: float = 1.0, raise_angle: float = RAISE_ANGLE,
                 settle_std: float = SETTLE_STD):
        self.fs = fs
        self.n = max(1, int(round(window * fs)))
        self.raise_angle = raise_angle
        self.settle_std = settle_std
        self._acc = deque(maxlen=self.n)
        self._sum = np.zeros(3)
        self._alphas = deque(maxlen=self.n)
        self.z_ref = None
        self.z = None
        self.alpha = 0.0
        self.in_progress = False
        self._open = None  # (t_start, heading_before)
        self.flags = []

    def process(self, t, accel, heading=None) -> tuple[list, np.ndarray]:
        """Return (flags closed in this chunk, per-sample in-progress mask)."""
        t = np.asarray(t, dtype=float)
        accel = np.asarray(accel, dtype=float)
        if heading is None:
            heading = np.full(len(t), math.nan)
        closed = []
        mask = np.zeros(len(t), dtype=bool)
        for i in range(len(t)):
            a = accel[i]
            if len(self._acc) == self.n:
                self._sum -= self._acc[0]
            self._acc.append(a)
            self._sum += a
            if len(self._acc) < self.n:
                continue
            m = self._sum / self.n
            z = m / np.linalg.norm(m)
            self.z = z
            if self.z_ref is None:
                self.z_ref = z
            cx = self.z_ref[1] * z[2] - self.z_ref[2] * z[1]
            cy = self.z_ref[2] * z[0] - self.z_ref[0] * z[2]
            cz = self.z_ref[0] * z[1] - self.z_ref[1] * z[0]
            alpha = math.asin(min(1.0, math.sqrt(cx * cx + cy * cy + cz * cz)))
            self.alpha = alpha
            self._alphas.append(alpha)
            if not self.in_progress:
                if alpha > self.raise_angle:
                    self.in_progress = True
                    self._open = (float(t[i]), float(heading[i]))
                    self._alphas.clear()
                    self._alphas.append(alpha)
            elif len(self._alphas) == self.n and float(np.std(self._alphas)) < self.settle_std:
                self.in_progress = False
                flag = DpcFlag(self._open[0], float(t[i]), self._open[1], float(heading[i]))
                closed.append(flag)
                self.flags.append(flag)
                self.z_ref = z
                self._alphas.clear()
                self._open = None
            mask[i] = self.in_progress or (closed and closed[-1].t_end == t[i])
        return closed, mask

    def open_flag(self):
        if self._open is None:
            return None
        return DpcFlag(self._open[0], None, self._open[1])


def detect_dpc(stream) -> list:
    """All DPC windows in a stream (a trailing open window has ``t_end=None``)."""
    s = as_stream(stream)
    if s.duration < 2.0:
        raise ValueError("DPC detection needs at least 2 s of samples")
    fs = (len(s) - 1) / s.duration
    det = DpcDetector(fs)
    flags, _ = det.process(s.t, s.accel)
    tail = det.open_flag()
    return flags + ([tail] if tail else [])
