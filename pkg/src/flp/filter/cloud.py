"""Particle cloud storage, priors and initialisation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

from ..map_core import CorrectionPolicy, MapModel, OutOfMap, collide_arrays, locate_many
from ..map_core.geometry import point_segment_distance
from ..rng import Lcg
from .config import FilterConfig

TWO_PI = 2.0 * math.pi


class Particle(NamedTuple):
    x: float
    y: float
    epsilon: float
    beta: float
    floor: int
    weight: float


@dataclass(frozen=True)
class KnownPose:
    x: float
    y: float
    floor: int = 0
    sigma: float = 0.0
    beta: float = 0.0
    beta_sigma: float = 0.0
    epsilon_sigma: float = 0.0


@dataclass(frozen=True)
class KnownPosition:
    x: float
    y: float
    floor: int = 0
    sigma: float = 1.0


@dataclass(frozen=True)
class Global:
    floor: int = 0


Prior = Union[KnownPose, KnownPosition, Global]


class Cloud:
    """Structure-of-arrays particle set with its own random streams.

    Gaussian draws come from a PCG64 generator; resampling draws come from
    the LCG. Both are seeded from the engine seed, so a run is fully
    reproducible.
    """

    def __init__(self, n: int, seed: int = 0):
        self.n = n
        self.x = np.zeros(n)
        self.y = np.zeros(n)
        self.epsilon = np.zeros(n)
        self.beta = np.zeros(n)
        self.floor = np.zeros(n, dtype=np.int64)
        self.w = np.full(n, 1.0 / n)
        self.rng = np.random.default_rng(seed)
        self.lcg = Lcg(seed)
        self.epoch = 0
        # end points of the last prediction, used by the collision step
        self.prev_x = self.x.copy()
        self.prev_y = self.y.copy()

    def __len__(self):
        return self.n

    @property
    def xy(self) -> np.ndarray:
        return np.column_stack([self.x, self.y])

    def particles(self) -> list:
        return [Particle(float(self.x[i]), float(self.y[i]), float(self.epsilon[i]), float(self.beta[i]),
                         int(self.floor[i]), float(self.w[i])) for i in range(self.n)]

    def normalize(self) -> bool:
        """Rescale weights to sum 1; returns False (weights untouched) if all are zero."""
        s = self.w.sum()
        if not s > 0 or not math.isfinite(s):
            return False
        self.w /= s
        return True

    def floors(self) -> np.ndarray:
        """Distinct floor indices present in the cloud."""
        f0 = self.floor[0]
        if (self.floor == f0).all():
            return self.floor[:1]
        return np.unique(self.floor)

    def dominant_floor(self) -> int:
        floors = self.floors()
        if len(floors) == 1:
            return int(floors[0])
        mass = [self.w[self.floor == f].sum() for f in floors]
        return int(floors[int(np.argmax(mass))])

    def copy(self) -> "Cloud":
        c = Cloud.__new__(Cloud)
        c.__dict__.update({k: (v.copy() if isinstance(v, np.ndarray) else v) for k, v in self.__dict__.items()})
        return c


def blocked_from(x0, y0, x1, y1, floor) -> np.ndarray:
    """True where the straight path (x0, y0) -> (x1, y1) crosses a wall."""
    if len(floor.segs) == 0 or len(x1) == 0:
        return np.zeros(len(x1), dtype=bool)
    x0 = np.broadcast_to(np.asarray(x0, dtype=float), np.shape(x1))
    y0 = np.broadcast_to(np.asarray(y0, dtype=float), np.shape(y1))
    status, *_ = collide_arrays(x0, y0, x1, y1, floor.segs, floor.boxes, CorrectionPolicy.disabled())
    return status != 0


def near_wall(x, y, floor, clearance: float) -> np.ndarray:
    if len(floor.segs) == 0 or clearance <= 0:
        return np.zeros(len(x), dtype=bool)
    d = point_segment_distance(np.asarray(x)[:, None], np.asarray(y)[:, None], floor.segs)
    return d.min(axis=1) < clearance


def inside_floor(x, y, floor) -> np.ndarray:
    return locate_many(np.column_stack([x, y]), floor) >= 0


def sample_gaussian_reachable(cloud: Cloud, idx, cx, cy, sigma, floor, tries: int = 20):
    """Place particles ``idx`` around (cx, cy) with std ``sigma``, never across a wall."""
    idx = np.asarray(idx)
    cx = np.broadcast_to(np.asarray(cx, dtype=float), idx.shape).copy()
    cy = np.broadcast_to(np.asarray(cy, dtype=float), idx.shape).copy()
    x, y = cx.copy(), cy.copy()
    todo = np.arange(len(idx))
    if sigma > 0:
        for _ in range(tries):
            if len(todo) == 0:
                break
            px = cx[todo] + cloud.rng.normal(0.0, sigma, len(todo))
            py = cy[todo] + cloud.rng.normal(0.0, sigma, len(todo))
            bad = blocked_from(cx[todo], cy[todo], px, py, floor) | ~inside_floor(px, py, floor)
            ok = todo[~bad]
            x[ok], y[ok] = px[~bad], py[~bad]
            todo = todo[bad]
    # anything still unplaced stays on its centre
    cloud.x[idx], cloud.y[idx] = x, y


def sample_global(cloud: Cloud, idx, floor, clearance: float, tries: int = 50):
    """Uniform over the union of partition bounds, away from walls."""
    idx = np.asarray(idx)
    b = floor.bounds_array
    area = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    p = area / area.sum()
    todo = np.arange(len(idx))
    for _ in range(tries):
        if len(todo) == 0:
            return
        k = cloud.rng.choice(len(b), size=len(todo), p=p)
        px = cloud.rng.uniform(b[k, 0], b[k, 2])
        py = cloud.rng.uniform(b[k, 1], b[k, 3])
        bad = near_wall(px, py, floor, clearance)
        ok = todo[~bad]
        cloud.x[idx[ok]], cloud.y[idx[ok]] = px[~bad], py[~bad]
        todo = todo[bad]
    if len(todo):
        raise OutOfMap(f"could not place {len(todo)} particles clear of walls on floor {floor.index}")


def init_cloud(prior: Prior, config: FilterConfig, map_model: MapModel, seed: int = 0) -> Cloud:
    """New cloud sampled from ``prior``; weights uniform."""
    n = config.n_particles
    cloud = Cloud(n, seed)
    floor = map_model.floor(prior.floor)
    cloud.floor[:] = prior.floor
    allidx = np.arange(n)
    if isinstance(prior, Global):
        sample_global(cloud, allidx, floor, config.spawn_wall_clearance)
    else:
        if not inside_floor(np.array([prior.x]), np.array([prior.y]), floor)[0]:
            raise OutOfMap(f"prior ({prior.x}, {prior.y}) outside floor {prior.floor}")
        sample_gaussian_reachable(cloud, allidx, prior.x, prior.y, prior.sigma, floor)
    if isinstance(prior, KnownPose):
        cloud.beta[:] = prior.beta + (cloud.rng.normal(0.0, prior.beta_sigma, n) if prior.beta_sigma > 0 else 0.0)
        cloud.epsilon[:] = cloud.rng.normal(0.0, prior.epsilon_sigma, n) if prior.epsilon_sigma > 0 else 0.0
    else:
        cloud.beta[:] = cloud.rng.uniform(0.0, TWO_PI, n)
        cloud.epsilon[:] = cloud.rng.normal(0.0, config.epsilon_init_sigma, n)
    np.mod(cloud.beta, TWO_PI, out=cloud.beta)
    np.clip(cloud.epsilon, -config.epsilon_limit, config.epsilon_limit, out=cloud.epsilon)
    cloud.prev_x, cloud.prev_y = cloud.x.copy(), cloud.y.copy()
    return cloud
