"""Step detection on the accelerometer norm and the frequency/height step-length model."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .types import StreamTooShort, as_stream

MIN_FS = 20.0
MIN_DURATION = 3.0
STEP_LENGTH_MIN = 0.3
STEP_LENGTH_MAX = 1.2
FREQ_MIN, FREQ_MAX = 0.5, 3.0


@dataclass(frozen=True)
class StepModelParams:
    a: float = 0.339
    b: float = 0.585
    c: float = -0.923
    user_height: float = 1.75

    def __post_init__(self):
        if not 1.0 <= self.user_height <= 2.3:
            raise ValueError(f"user height {self.user_height} m outside [1.0, 2.3]")


def step_length_raw(frequency, params: StepModelParams):
    return params.a * frequency + params.b * params.user_height + params.c


def step_length(frequency: float, params: StepModelParams) -> float:
    """Step length (m) from cadence (Hz) and user height, clamped to [0.3, 1.2]."""
    if not FREQ_MIN <= frequency <= FREQ_MAX:
        raise ValueError(f"step frequency {frequency} Hz outside [{FREQ_MIN}, {FREQ_MAX}]")
    return float(np.clip(step_length_raw(frequency, params), STEP_LENGTH_MIN, STEP_LENGTH_MAX))


def frequency_for_speed(speed: float, params: StepModelParams) -> float:
    """Cadence whose model step length times cadence equals ``speed`` (m/s)."""
    # a F^2 + (bH + c) F - v = 0, positive root
    k = params.b * params.user_height + params.c
    f = (-k + np.sqrt(k * k + 4 * params.a * speed)) / (2 * params.a)
    return float(f)


def step_bandpass(fs: float, band=(1.0, 2.0)) -> np.ndarray:
    hp = signal.butter(2, band[0], "highpass", fs=fs, output="sos")
    lp = signal.butter(2, band[1], "lowpass", fs=fs, output="sos")
    return np.vstack([hp, lp])


class StepDetector:
    """Streaming band-pass + peak picker.

    Feed consecutive chunks through :meth:`process`; the filter state and a
    one-sample look-ahead carry across chunk boundaries. The first sample's
    norm is subtracted before filtering so a resting device starts the
    zero-initialised filter at equilibrium.
    """

    def __init__(self, fs: float, band=(1.0, 2.0), min_spacing: float = 0.33,
                 min_amplitude: float = 0.5, regularity_cv: float = 0.15,
                 regularity_window: int = 4, default_frequency: float = 1.6,
                 max_interval: float = 2.0):
        self.fs = fs
        self.sos = step_bandpass(fs, band)
        self.zi = np.zeros((self.sos.shape[0], 2))
        self.min_spacing = min_spacing
        self.min_amplitude = min_amplitude
        self.regularity_cv = regularity_cv
        self.default_frequency = default_frequency
        self.max_interval = max_interval
        self.offset = None
        self._tail_t = np.zeros(0)
        self._tail_y = np.zeros(0)
        self._tail_dpc = np.zeros(0, dtype=bool)
        self._last_peak = None
        self.intervals = deque(maxlen=regularity_window)
        self.suppressed = 0

    def filter(self, norm: np.ndarray) -> np.ndarray:
        if self.offset is None and len(norm):
            self.offset = float(norm[0])
        y, self.zi = signal.sosfilt(self.sos, norm - self.offset, zi=self.zi)
        return y

    def regular(self) -> bool:
        if len(self.intervals) < self.intervals.maxlen:
            return False
        iv = np.asarray(self.intervals)
        return float(iv.std() / iv.mean()) < self.regularity_cv

    def process(self, t, norm, in_dpc=None) -> list:
        """Return ``[(t, frequency), ...]`` for steps completed in this chunk."""
        t = np.asarray(t, dtype=float)
        if in_dpc is None:
            in_dpc = np.zeros(len(t), dtype=bool)
        y = self.filter(np.asarray(norm, dtype=float))
        tt = np.concatenate([self._tail_t, t])
        yy = np.concatenate([self._tail_y, y])
        dd = np.concatenate([self._tail_dpc, np.asarray(in_dpc, dtype=bool)])
        steps = []
        if len(yy) >= 3:
            mid = yy[1:-1]
            cand = np.nonzero((mid > yy[:-2]) & (mid >= yy[2:]) & (mid >= self.min_amplitude))[0] + 1
            for i in cand:
                # parabolic refinement of the peak time
                den = yy[i - 1] - 2 * yy[i] + yy[i + 1]
                frac = 0.5 * (yy[i - 1] - yy[i + 1]) / den if den != 0 else 0.0
                ti = tt[i] + frac * (tt[i + 1] - tt[i] if frac > 0 else tt[i] - tt[i - 1])
                if self._last_peak is not None and ti - self._last_peak < self.min_spacing:
                    continue
                freq = self.default_frequency
                if self._last_peak is not None:
                    iv = ti - self._last_peak
                    if iv <= self.max_interval:
                        self.intervals.append(iv)
                        freq = 1.0 / iv
                    else:
                        self.intervals.clear()
                self._last_peak = ti
                if dd[i] and not self.regular():
                    self.suppressed += 1
                    continue
                steps.append((float(ti), float(np.clip(freq, FREQ_MIN, FREQ_MAX))))
        # keep the last two samples: the final one still needs a right neighbour
        self._tail_t, self._tail_y, self._tail_dpc = tt[-2:], yy[-2:], dd[-2:]
        return steps


def detect_steps(stream, fs: float, dpc_flags=(), **kwargs) -> list:
    """Step times and frequencies for a whole stream.

    Steps inside a device-position-change window are dropped unless the
    recent cadence is regular.
    """
    s = as_stream(stream)
    if fs < MIN_FS:
        raise ValueError(f"sampling rate {fs} Hz below {MIN_FS} Hz")
    if s.duration < MIN_DURATION:
        raise StreamTooShort(f"stream lasts {s.duration:.2f} s (< {MIN_DURATION} s)")
    in_dpc = np.zeros(len(s), dtype=bool)
    for f in dpc_flags:
        end = np.inf if f.t_end is None else f.t_end
        in_dpc |= (s.t >= f.t_start) & (s.t <= end)
    det = StepDetector(fs, **kwargs)
    return det.process(s.t, np.linalg.norm(s.accel, axis=1), in_dpc)
