"""Accuracy metrics: D5, D10, RMSE and the four-class verdict."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .scenario import GroundTruth

MIN_OVERLAP = 0.9


class NoOverlap(ValueError):
    """Estimates cover less than 90 % of the ground-truth time span."""


class Verdict(str, enum.Enum):
    PERFECT = "Perfect"
    GOOD = "Good"
    MIDDLE = "Middle"
    BAD = "Bad"


def verdict_for(d5: float) -> Verdict:
    """Class from D5 (percent); a value on a bin edge goes to the better class."""
    if d5 >= 80.0:
        return Verdict.PERFECT
    if d5 >= 60.0:
        return Verdict.GOOD
    if d5 >= 40.0:
        return Verdict.MIDDLE
    return Verdict.BAD


@dataclass(frozen=True)
class MetricsReport:
    d5: float
    d10: float
    rmse: float
    verdict: Verdict
    error_series: tuple  # ((t, metres), ...)

    @property
    def mean_error(self) -> float:
        e = [v for _, v in self.error_series]
        return float(np.mean(e)) if e else 0.0


def _estimate_arrays(estimates):
    if isinstance(estimates, np.ndarray):
        arr = np.asarray(estimates, dtype=float)
        return arr[:, 0], arr[:, 1], arr[:, 2]
    t, x, y = [], [], []
    for e in estimates:
        if hasattr(e, "x"):
            t.append(e.t)
            x.append(e.x)
            y.append(e.y)
        else:
            t.append(e[0])
            x.append(e[1])
            y.append(e[2])
    return np.asarray(t, dtype=float), np.asarray(x, dtype=float), np.asarray(y, dtype=float)


def held_positions(estimates, times) -> np.ndarray:
    """Position in force at each of ``times``: the latest estimate at or before it."""
    et, ex, ey = _estimate_arrays(estimates)
    order = np.argsort(et, kind="stable")
    et, ex, ey = et[order], ex[order], ey[order]
    idx = np.searchsorted(et, times, side="right") - 1
    if np.any(idx < 0):
        raise ValueError("a query time precedes the first estimate")
    return np.column_stack([ex[idx], ey[idx]])


def compute_metrics(estimates, truth: GroundTruth) -> MetricsReport:
    """Compare held-last-value estimates with the truth at its sample times.

    ``estimates`` are objects with ``t``, ``x``, ``y`` or (t, x, y) rows.
    Truth samples before the first estimate are not scored.
    """
    et, _, _ = _estimate_arrays(estimates)
    if len(et) == 0:
        raise NoOverlap("no estimates")
    t0, t1 = float(truth.t[0]), float(truth.t[-1])
    span = t1 - t0
    # a held estimate stays valid until the end of the truth
    covered = t1 - max(et.min(), t0) if et.min() <= t1 else 0.0
    if span > 0 and covered / span < MIN_OVERLAP - 1e-12:
        raise NoOverlap(f"estimates cover {100 * max(covered, 0) / span:.1f} % of the truth span")
    keep = truth.t >= et.min()
    tt = truth.t[keep]
    pos = held_positions(estimates, tt)
    err = np.hypot(pos[:, 0] - truth.xy[keep, 0], pos[:, 1] - truth.xy[keep, 1])
    d5 = 100.0 * float(np.mean(err < 5.0))
    d10 = 100.0 * float(np.mean(err < 10.0))
    rmse = float(math.sqrt(np.mean(err ** 2)))
    series = tuple(zip(tt.tolist(), err.tolist()))
    return MetricsReport(d5, d10, rmse, verdict_for(d5), series)
