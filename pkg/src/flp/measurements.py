"""Likelihood models for GNSS fixes and scalar beacon RSS observations.

The RSS model is piecewise linear in distance: a steep near branch and a
nearly flat far branch where the receiver saturates. The two branches
do not meet at the breakpoint (near(35) = -86.9 dBm, far(35) = -86.03
dBm); the breakpoint itself belongs to the near branch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_SQRT_2PI = math.sqrt(2.0 * math.pi)


class UnknownBeacon(KeyError):
    pass


@dataclass(frozen=True)
class GnssFix:
    t: float
    position: tuple
    sigma: float = 5.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("GNSS sigma must be positive")


@dataclass(frozen=True)
class RssObservation:
    t: float
    beacon_id: str
    rss: float

    def __post_init__(self):
        if not -120.0 <= self.rss <= 0.0:
            raise ValueError(f"RSS {self.rss} dBm outside [-120, 0]")


@dataclass(frozen=True)
class RssModelParams:
    slope_near: float = -0.94
    intercept_near: float = -54.0
    slope_far: float = -0.058
    intercept_far: float = -84.0
    breakpoint: float = 35.0
    sigma: float = 10.0

    def __post_init__(self):
        if not (self.breakpoint > 0 and self.sigma > 0):
            raise ValueError("breakpoint and sigma must be positive")


def rss_from_distance(d, params: RssModelParams = RssModelParams()):
    d = np.asarray(d, dtype=float)
    out = np.where(d <= params.breakpoint,
                   params.slope_near * d + params.intercept_near,
                   params.slope_far * d + params.intercept_far)
    return out if out.ndim else float(out)


def rss_predict(x, beacon, params: RssModelParams = RssModelParams()):
    """Expected RSS (dBm) at position(s) ``x`` from ``beacon``."""
    x = np.asarray(x, dtype=float)
    bx, by = beacon.position
    d = np.hypot(x[..., 0] - bx, x[..., 1] - by)
    return rss_from_distance(d, params)


def normal_pdf(residual, sigma):
    r = np.asarray(residual, dtype=float) / sigma
    return np.exp(-0.5 * r * r) / (sigma * _SQRT_2PI)


def rss_likelihood(z: RssObservation, x, beacon, params: RssModelParams = RssModelParams()):
    """Density of the observed RSS given position(s) ``x``."""
    if beacon is None or beacon.id != z.beacon_id:
        raise UnknownBeacon(z.beacon_id)
    return normal_pdf(z.rss - rss_predict(x, beacon, params), params.sigma)


def resolve_beacon(beacons, beacon_id: str):
    try:
        return beacons[beacon_id]
    except KeyError:
        raise UnknownBeacon(beacon_id) from None


def gnss_likelihood(z: GnssFix, x):
    """Isotropic bivariate normal density of the fix given position(s) ``x``."""
    x = np.asarray(x, dtype=float)
    s2 = z.sigma * z.sigma
    dx = x[..., 0] - z.position[0]
    dy = x[..., 1] - z.position[1]
    return np.exp(-0.5 * (dx * dx + dy * dy) / s2) / (2.0 * math.pi * s2)
