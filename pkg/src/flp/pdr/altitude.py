"""Barometric altitude variation and floor-change detection."""

from __future__ import annotations

import math

import numpy as np
from scipy import signal

from .types import FloorEvent, UnknownFloor

P0_HPA = 1013.25
HP_TAU = 60.0
LP_CUTOFF = 0.2


def pressure_to_altitude(p_hpa):
    return 44330.0 * (1.0 - (np.asarray(p_hpa, dtype=float) / P0_HPA) ** 0.1903)


def altitude_to_pressure(alt_m):
    return P0_HPA * (1.0 - np.asarray(alt_m, dtype=float) / 44330.0) ** (1.0 / 0.1903)


def highpass_coeffs(fs: float, tau: float = HP_TAU):
    """First-order Butterworth high-pass with time constant ``tau`` (s)."""
    return signal.butter(1, 1.0 / (2 * math.pi * tau), "highpass", fs=fs)


class AltitudeFilter:
    """First-order high-pass (time constant ``hp_tau``) then 2nd-order low-pass.

    The first altitude is subtracted so both zero-initialised stages start
    at rest.
    """

    def __init__(self, fs: float, hp_tau: float = HP_TAU, lp_cutoff: float = LP_CUTOFF):
        if fs < 1.0:
            raise ValueError("pressure rate must be >= 1 Hz")
        self.fs = fs
        self.hp_tau = hp_tau
        self.hp_b, self.hp_den = highpass_coeffs(fs, hp_tau)
        self.hp_zi = np.zeros(1)
        self.lp_sos = signal.butter(2, min(lp_cutoff, 0.45 * fs), "lowpass", fs=fs, output="sos")
        self.lp_zi = np.zeros((self.lp_sos.shape[0], 2))
        self.ref = None

    def process(self, pressure) -> np.ndarray:
        alt = pressure_to_altitude(pressure)
        if self.ref is None and len(alt):
            self.ref = float(alt[0])
        x = alt - self.ref
        y, self.hp_zi = signal.lfilter(self.hp_b, self.hp_den, x, zi=self.hp_zi)
        y, self.lp_zi = signal.sosfilt(self.lp_sos, y, zi=self.lp_zi)
        return y


def update_altitude(pressure, fs: float, **kwargs) -> np.ndarray:
    """Band-limited altitude variation (m) of a pressure series (hPa)."""
    return AltitudeFilter(fs, **kwargs).process(np.asarray(pressure, dtype=float))


class FloorChangeDetector:
    """Detects vertical transitions in the altitude-variation stream.

    The high-pass stage is inverted sample by sample (exact for the
    first-order filter; the low-pass commutes with it), which recovers the
    smoothed altitude without the decay that drift removal imposes on a
    held level. A transition starts when its 1 s slope exceeds
    ``rate_threshold`` and ends after ``quiet_time`` seconds below it.
    Events carry the delay from the end of motion as ``latency``.
    """

    def __init__(self, fs: float, floor_heights, current_floor: int, hp_tau: float = HP_TAU,
                 rate_threshold: float = 0.05, quiet_time: float = 3.0, floor_offset: int = 0):
        heights = np.asarray(floor_heights, dtype=float)
        if len(heights) > 1 and np.any(np.diff(heights) <= 0):
            raise ValueError("floor heights must increase strictly")
        self.fs = fs
        self.heights = heights
        self.floor_offset = floor_offset
        self.floor = current_floor
        b, a = highpass_coeffs(fs, hp_tau)
        self._b0, self._a1 = float(b[0]), float(a[1])
        gaps = np.diff(heights)
        self.half_gap = 0.5 * float(gaps.min()) if len(gaps) else math.inf
        self.rate_threshold = rate_threshold
        self.quiet_n = max(1, int(round(quiet_time * fs)))
        self.lag = max(1, int(round(fs)))
        self._hist = []
        self._prev_y = 0.0
        self.level = 0.0
        self.moving = False
        self._start_level = 0.0
        self._quiet = 0
        self._t_quiet = None

    def _target_floor(self, delta: float) -> int:
        base = self.heights[self.floor - self.floor_offset]
        target = base + delta
        lo = self.heights[0] - self.half_gap
        hi = self.heights[-1] + self.half_gap
        if not lo <= target <= hi:
            raise UnknownFloor(f"altitude {target:.2f} m outside building span [{lo:.2f}, {hi:.2f}]")
        return int(np.argmin(np.abs(self.heights - target))) + self.floor_offset

    def process(self, t, variation) -> list:
        t = np.asarray(t, dtype=float)
        y = np.asarray(variation, dtype=float)
        events = []
        for i in range(len(y)):
            yi = float(y[i])
            # x[n] - x[n-1] = (y[n] + a1 y[n-1]) / b0
            self.level += (yi + self._a1 * self._prev_y) / self._b0
            self._prev_y = yi
            self._hist.append(self.level)
            if len(self._hist) > self.lag + 1:
                self._hist.pop(0)
            rate = (self.level - self._hist[0]) * self.fs / max(1, len(self._hist) - 1)
            if not self.moving:
                if abs(rate) > self.rate_threshold:
                    self.moving = True
                    self._start_level = self._hist[0]
                    self._quiet = 0
                continue
            if abs(rate) >= self.rate_threshold:
                self._quiet = 0
                continue
            if self._quiet == 0:
                self._t_quiet = float(t[i])
            self._quiet += 1
            if self._quiet < self.quiet_n:
                continue
            self.moving = False
            delta = self.level - self._start_level
            if abs(delta) >= self.half_gap:
                new_floor = self._target_floor(delta)
                if new_floor != self.floor:
                    events.append(FloorEvent(float(t[i]), delta, new_floor, float(t[i]) - self._t_quiet))
                    self.floor = new_floor
        return events


def detect_floor_change(variation, current_floor: int, floor_heights, fs: float = 1.0,
                        t0: float = 0.0, **kwargs):
    """First floor event in a variation series, or None."""
    t = t0 + np.arange(len(variation)) / fs
    det = FloorChangeDetector(fs, floor_heights, current_floor, **kwargs)
    events = det.process(t, variation)
    return events[0] if events else None
