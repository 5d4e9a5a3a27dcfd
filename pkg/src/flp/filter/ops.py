"""SIR filter operations: epochs, prediction, weighting, collisions, resampling."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from ..map_core import KILL, CORRECTED, CorrectionPolicy, MapModel, PartitionCache, ZoneKind, collide_arrays
from ..measurements import (GnssFix, RssModelParams, RssObservation, gnss_likelihood, resolve_beacon,
                            rss_likelihood)
from .cloud import TWO_PI, Cloud, blocked_from, sample_gaussian_reachable, sample_global
from .config import FilterConfig, NoiseConfig

log = logging.getLogger(__name__)


class NoStairway(Exception):
    """The target floor has no stairway zone; the cloud was re-initialised globally."""


class Trigger(str, enum.Enum):
    STEP = "step"
    HIGH_RSS = "high_rss"


@dataclass(frozen=True)
class UpdateEpoch:
    """One filter update.

    ``aggregated_length``/``aggregated_heading`` are the norm and angle of
    the vector sum of the pending steps, so a multi-step epoch moves
    exactly as far as its steps would individually.
    """
    aggregated_length: float
    aggregated_heading: float
    trigger: Trigger
    measurements: tuple = ()
    n_steps: int = 0
    t: float = 0.0

    def __post_init__(self):
        if self.aggregated_length < 0:
            raise ValueError("aggregated_length must be >= 0")
        if self.trigger is Trigger.STEP and not self.aggregated_length > 0:
            raise ValueError("a step-triggered epoch needs a positive length")


@dataclass
class CollisionStats:
    tests: int = 0
    kills: int = 0
    corrected: int = 0
    evicted: list = field(default_factory=list)


def select_measurements(measurements) -> tuple:
    """Strongest pending RSS and latest GNSS fix."""
    rss = [m for m in measurements if isinstance(m, RssObservation)]
    gnss = [m for m in measurements if isinstance(m, GnssFix)]
    out = []
    if rss:
        out.append(max(rss, key=lambda m: (m.rss, -m.t)))
    if gnss:
        out.append(max(gnss, key=lambda m: m.t))
    return tuple(out)


def aggregate_steps(steps) -> tuple[float, float]:
    dx = sum(s.length * math.cos(s.heading) for s in steps)
    dy = sum(s.length * math.sin(s.heading) for s in steps)
    if not steps:
        return 0.0, 0.0
    length = math.hypot(dx, dy)
    heading = math.atan2(dy, dx) if length > 0 else steps[-1].heading
    return length, heading


def epoch_trigger(pending_steps, pending_measurements, config: FilterConfig):
    """Return an UpdateEpoch when enough steps or strong RSS readings are pending."""
    high = [m for m in pending_measurements
            if isinstance(m, RssObservation) and m.rss >= config.high_rss_threshold]
    enough_steps = len(pending_steps) >= config.steps_per_epoch
    if not (enough_steps or len(high) >= config.high_rss_count):
        return None
    length, heading = aggregate_steps(pending_steps)
    trigger = Trigger.STEP if enough_steps and length > 0 else Trigger.HIGH_RSS
    times = [s.t for s in pending_steps] + [m.t for m in pending_measurements]
    return UpdateEpoch(length, heading, trigger, select_measurements(pending_measurements),
                       len(pending_steps), max(times) if times else 0.0)


def _zone_values(floor, xy, kind: ZoneKind, attr: str, default: float) -> np.ndarray:
    out = np.full(len(xy), default)
    for z in floor.zones:
        if z.kind is kind:
            inside = z.contains(xy)
            out[inside] = getattr(z, attr)
    return out


@njit(cache=True)
def _move(x, y, eps, beta, L, eta, heading, lim):
    for i in range(x.shape[0]):
        d = (1.0 + eps[i]) * (L[i] + eta[0, i])
        a = (heading + beta[i]) + eta[1, i]
        x[i] += d * math.cos(a)
        y[i] += d * math.sin(a)
        eps[i] = min(max(eps[i] + eta[2, i], -lim), lim)
        b = (beta[i] + eta[3, i]) % TWO_PI
        beta[i] = b if b < TWO_PI else 0.0


def predict(cloud: Cloud, epoch: UpdateEpoch, noise: NoiseConfig, map_model: MapModel,
            config: FilterConfig = None, mask=None) -> Cloud:
    """Propagate particles (all, or those selected by ``mask``) through the motion model."""
    full = mask is None
    idx = slice(None) if full else np.flatnonzero(mask)
    n = cloud.n if full else len(idx)
    cloud.prev_x[idx] = cloud.x[idx]
    cloud.prev_y[idx] = cloud.y[idx]
    if n == 0:
        return cloud
    L = np.full(n, epoch.aggregated_length)
    if epoch.n_steps:
        fl = cloud.floor[idx]
        for f in (cloud.floors() if full else np.unique(fl)):
            floor = map_model.floor(int(f))
            if not floor.stairway_zones:
                continue
            sel = np.flatnonzero(fl == f)
            xy = np.column_stack([cloud.x[idx][sel], cloud.y[idx][sel]])
            ls = _zone_values(floor, xy, ZoneKind.STAIRWAY, "stairway_step_length", math.nan)
            stair = ~np.isnan(ls)
            L[sel[stair]] = epoch.n_steps * ls[stair]
    # one block of standard normals: rows d, alpha, epsilon, beta
    sig = np.array([noise.sigma_d, noise.sigma_alpha, noise.sigma_epsilon, noise.sigma_beta])
    if sig.any():
        eta = cloud.rng.standard_normal((4, n)) * sig[:, None]
    else:
        eta = np.zeros((4, n))
    lim = config.epsilon_limit if config is not None else 0.5
    if full:
        _move(cloud.x, cloud.y, cloud.epsilon, cloud.beta, L, eta, epoch.aggregated_heading, lim)
    else:
        x, y, eps, beta = cloud.x[idx], cloud.y[idx], cloud.epsilon[idx], cloud.beta[idx]
        _move(x, y, eps, beta, L, eta, epoch.aggregated_heading, lim)
        cloud.x[idx], cloud.y[idx], cloud.epsilon[idx], cloud.beta[idx] = x, y, eps, beta
    return cloud


def apply_dpc(cloud: Cloud, config: FilterConfig, heading_before: float, heading_after: float) -> Cloud:
    """Re-draw the misalignment of a random subset; shift the rest to keep user heading."""
    n = cloud.n
    k = int(round(config.dpc_uniform_fraction * n))
    uniform = np.zeros(n, dtype=bool)
    if k:
        uniform[cloud.rng.choice(n, size=k, replace=False)] = True
    delta = heading_before - heading_after
    cloud.beta[~uniform] = np.mod(cloud.beta[~uniform] + delta, TWO_PI)
    cloud.beta[uniform] = cloud.rng.uniform(0.0, TWO_PI, k)
    return cloud


def _neutral_fill(lik: np.ndarray, w: np.ndarray, skip: np.ndarray) -> np.ndarray | None:
    """Give skipped particles the weighted-average likelihood of the others.

    Returns None when every particle is skipped (the measurement carries
    no information for this cloud).
    """
    if not skip.any():
        return lik
    use = ~skip
    if not use.any():
        return None
    wu = w[use]
    s = wu.sum()
    fill = float(np.dot(wu, lik[use]) / s) if s > 0 else float(lik[use].mean())
    lik = lik.copy()
    lik[skip] = fill
    return lik


def measurement_update(cloud: Cloud, measurements, map_model: MapModel, config: FilterConfig,
                       rss_params: RssModelParams = RssModelParams()) -> Cloud:
    """Weight by each measurement, then by high-accessibility zone factors; renormalise.

    Particles in a GNSS-denied zone, and particles on a floor other than
    the beacon's, are neutral for that measurement: they receive the
    weighted mean likelihood of the remaining particles, which leaves
    their relative weight unchanged.
    """
    if isinstance(measurements, (GnssFix, RssObservation)):
        measurements = (measurements,)
    w_prev = cloud.w.copy()
    xy = None
    floors = cloud.floors()
    for m in measurements:
        if xy is None:
            xy = cloud.xy
        if isinstance(m, RssObservation):
            beacon = resolve_beacon(map_model.beacons, m.beacon_id)
            lik = np.asarray(rss_likelihood(m, xy, beacon, rss_params), dtype=float)
            skip = cloud.floor != beacon.floor
        elif isinstance(m, GnssFix):
            lik = np.asarray(gnss_likelihood(m, xy), dtype=float)
            skip = np.zeros(cloud.n, dtype=bool)
            for f in floors:
                floor = map_model.floor(int(f))
                if floor.zones_of(ZoneKind.GNSS_DENIED):
                    on = cloud.floor == f
                    skip[on] = floor.in_any_zone(xy[on], ZoneKind.GNSS_DENIED)
        else:
            raise TypeError(f"unsupported measurement {type(m).__name__}")
        lik = _neutral_fill(lik, cloud.w, skip)
        if lik is None:
            continue
        top = lik.max()
        if top > 0:
            cloud.w *= lik / top
    if config.accessibility:
        for f in floors:
            floor = map_model.floor(int(f))
            if not floor.zones_of(ZoneKind.HIGH_ACCESSIBILITY):
                continue
            if xy is None:
                xy = cloud.xy
            on = np.flatnonzero(cloud.floor == f)
            cloud.w[on] *= _zone_values(floor, xy[on], ZoneKind.HIGH_ACCESSIBILITY, "weight_factor", 1.0)
    if not cloud.normalize():
        # every hypothesis ruled out at once: treat the update as uninformative
        cloud.w[:] = w_prev
        cloud.normalize()
    return cloud


@njit(cache=True)
def _partition_overlap(x0, y0, x1, y1, b):
    """Per displacement: which partition boxes its box overlaps, and whether it ends in any."""
    n = x0.shape[0]
    k = b.shape[0]
    overlap = np.zeros((n, k), dtype=np.bool_)
    inside = np.zeros(n, dtype=np.bool_)
    for i in range(n):
        lox = min(x0[i], x1[i])
        hix = max(x0[i], x1[i])
        loy = min(y0[i], y1[i])
        hiy = max(y0[i], y1[i])
        for j in range(k):
            if lox <= b[j, 2] and hix >= b[j, 0] and loy <= b[j, 3] and hiy >= b[j, 1]:
                overlap[i, j] = True
            if b[j, 0] <= x1[i] <= b[j, 2] and b[j, 1] <= y1[i] <= b[j, 3]:
                inside[i] = True
    return overlap, inside


def policy_from_config(config: FilterConfig) -> CorrectionPolicy:
    return CorrectionPolicy(config.corrections, math.radians(config.grazing_angle_deg),
                            config.wall_margin, config.head_on_fraction)


def apply_collisions(cloud: Cloud, map_model: MapModel, cache: PartitionCache, config: FilterConfig,
                     policy: CorrectionPolicy | None = None, stats: CollisionStats | None = None) -> Cloud:
    """Resolve each live particle's last displacement against the walls.

    Occupancy of a partition is the number of live particles whose
    displacement box overlaps it. Partitions are fetched in ascending
    occupancy so that, when more than the cache can hold are needed, the
    most populated ones stay resident; particles touching a partition that
    could not stay resident are zeroed. Particles ending outside every
    partition of their floor are zeroed as well.
    """
    if policy is None:
        policy = policy_from_config(config)
    stats = stats if stats is not None else CollisionStats()
    alive = cloud.w > 0
    per_floor = []
    occupancy = {}
    floors = cloud.floors()
    for f in floors:
        f = int(f)
        floor = map_model.floor(f)
        sel = np.flatnonzero(alive) if len(floors) == 1 else np.flatnonzero(alive & (cloud.floor == f))
        if len(sel) == cloud.n:
            x0, y0, x1, y1 = cloud.prev_x, cloud.prev_y, cloud.x, cloud.y
        else:
            x0, y0, x1, y1 = cloud.prev_x[sel], cloud.prev_y[sel], cloud.x[sel], cloud.y[sel]
        overlap, inside = _partition_overlap(x0, y0, x1, y1, floor.bounds_array)
        occ = overlap.sum(axis=0)
        pids = [p.id for p in floor.partitions]
        for j in np.flatnonzero(occ):
            occupancy[(f, pids[j])] = int(occ[j])
        per_floor.append((f, floor, sel, overlap, inside, pids))

    for key in sorted(occupancy, key=lambda k: (occupancy[k], k)):
        _, ev = cache.fetch(key, occupancy)
        if ev is not None:
            stats.evicted.append(ev)

    for f, floor, sel, overlap, inside, pids in per_floor:
        resident = np.array([(f, pid) in cache for pid in pids])
        lost = (overlap & ~resident).any(axis=1)
        dead = lost | ~inside
        if dead.any():
            cloud.w[sel[dead]] = 0.0
            stats.kills += int(dead.sum())
        live = ~dead
        used = np.flatnonzero(overlap.any(axis=0) & resident)
        if len(floor.segs) == 0 or not live.any() or len(used) == 0:
            continue
        parts = floor.partitions
        if len(used) == 1:
            widx = parts[used[0]].wall_idx
        else:
            widx = np.unique(np.concatenate([parts[j].wall_idx for j in used]))
        if len(widx) == 0:
            continue
        segs = floor.segs if len(widx) == len(floor.segs) else floor.segs[widx]
        boxes = floor.boxes if len(widx) == len(floor.boxes) else floor.boxes[widx]
        if len(sel) == cloud.n:
            x0, y0, x1, y1 = cloud.prev_x, cloud.prev_y, cloud.x, cloud.y
        else:
            x0, y0, x1, y1 = cloud.prev_x[sel], cloud.prev_y[sel], cloud.x[sel], cloud.y[sel]
        status, ex, ey, _, tests = collide_arrays(x0, y0, x1, y1, segs, boxes, policy, live)
        stats.tests += tests
        killed = status == KILL
        fixed = status == CORRECTED
        cloud.w[sel[killed]] = 0.0
        cloud.x[sel[fixed]] = ex[fixed]
        cloud.y[sel[fixed]] = ey[fixed]
        stats.kills += int(killed.sum())
        stats.corrected += int(fixed.sum())

    if not cloud.normalize():
        log.warning("every particle hit a wall; cloud re-initialised")
        recover_all_dead(cloud, map_model, config)
    return cloud


def _spawn_in_disc(cloud: Cloud, idx, beacon, radius: float):
    u = cloud.lcg.uniforms(2 * len(idx))
    r = radius * np.sqrt(u[0::2])
    a = TWO_PI * u[1::2]
    cloud.x[idx] = beacon.position[0] + r * np.cos(a)
    cloud.y[idx] = beacon.position[1] + r * np.sin(a)
    cloud.floor[idx] = beacon.floor


def recover_all_dead(cloud: Cloud, map_model: MapModel, config: FilterConfig, anchor=None):
    """Re-initialise a cloud whose weights are all zero.

    With a beacon anchor the cloud is respawned in the anchor disc;
    otherwise it is spread uniformly over the current floor.
    """
    idx = np.arange(cloud.n)
    if anchor is not None:
        _spawn_in_disc(cloud, idx, anchor, config.beacon_resample_radius)
    else:
        floor = map_model.floor(cloud.dominant_floor())
        cloud.floor[:] = floor.index
        sample_global(cloud, idx, floor, config.spawn_wall_clearance)
    cloud.beta[:] = cloud.rng.uniform(0.0, TWO_PI, cloud.n)
    cloud.epsilon[:] = np.clip(cloud.rng.normal(0.0, config.epsilon_init_sigma, cloud.n),
                               -config.epsilon_limit, config.epsilon_limit)
    cloud.w[:] = 1.0 / cloud.n
    cloud.prev_x[:] = cloud.x
    cloud.prev_y[:] = cloud.y


def partial_resample(cloud: Cloud, config: FilterConfig, map_model: MapModel, anchor=None) -> np.ndarray:
    """Replace particles below the weight threshold; returns the replaced mask.

    Parents are drawn proportionally to weight with the LCG. Copies get a
    Gaussian position jitter unless that would cross a wall. With a beacon
    ``anchor`` (a strong RSS reading this epoch) replacements are spawned
    uniformly in the beacon disc instead.
    """
    if not cloud.w.sum() > 0:
        log.warning("all particle weights are zero; cloud re-initialised")
        recover_all_dead(cloud, map_model, config, anchor)
        return np.ones(cloud.n, dtype=bool)
    low = cloud.w < config.resample_weight_threshold
    k = int(low.sum())
    if k == 0:
        return low
    repl = np.flatnonzero(low)
    surv = np.flatnonzero(~low)
    cdf = np.cumsum(cloud.w[surv])
    u = cloud.lcg.uniforms(k) * cdf[-1]
    parents = surv[np.minimum(np.searchsorted(cdf, u, side="right"), len(surv) - 1)]
    cloud.beta[repl] = cloud.beta[parents]
    cloud.epsilon[repl] = cloud.epsilon[parents]
    cloud.floor[repl] = cloud.floor[parents]
    if anchor is not None:
        _spawn_in_disc(cloud, repl, anchor, config.beacon_resample_radius)
    else:
        px, py = cloud.x[parents], cloud.y[parents]
        jx = px + cloud.rng.normal(0.0, config.resample_jitter, k)
        jy = py + cloud.rng.normal(0.0, config.resample_jitter, k)
        for f in np.unique(cloud.floor[repl]):
            on = cloud.floor[repl] == f
            bad = blocked_from(px[on], py[on], jx[on], jy[on], map_model.floor(int(f)))
            jx[np.flatnonzero(on)[bad]] = px[on][bad]
            jy[np.flatnonzero(on)[bad]] = py[on][bad]
        cloud.x[repl], cloud.y[repl] = jx, jy
    cloud.prev_x[repl] = cloud.x[repl]
    cloud.prev_y[repl] = cloud.y[repl]
    cloud.w[repl] = 1.0 / cloud.n
    cloud.normalize()
    return low


def handle_floor_change(cloud: Cloud, new_floor: int, map_model: MapModel, config: FilterConfig) -> np.ndarray:
    """Move the cloud to ``new_floor``; returns the mask of relocated particles.

    Particles inside a stairway zone keep their state. The others are
    relocated around a stairway exit of the new floor drawn with
    probability proportional to exp(-distance / lambda). Raises
    NoStairway after falling back to a global re-initialisation when the
    new floor has no stairway.
    """
    target = map_model.floor(new_floor)
    zones = target.stairway_zones
    if not zones:
        cloud.floor[:] = new_floor
        recover_all_dead(cloud, map_model, config)
        raise NoStairway(f"floor {new_floor} has no stairway zone")
    xy = cloud.xy
    in_stair = target.in_any_zone(xy, ZoneKind.STAIRWAY)
    for f in np.unique(cloud.floor):
        on = cloud.floor == f
        in_stair[on] |= map_model.floor(int(f)).in_any_zone(xy[on], ZoneKind.STAIRWAY)
    move = np.flatnonzero(~in_stair)
    exits = np.array([p for z in zones for p in z.exit_points], dtype=float)
    if len(move):
        d = np.hypot(xy[move, 0:1] - exits[:, 0], xy[move, 1:2] - exits[:, 1])
        logit = -d / config.stairway_decay_lambda
        p = np.exp(logit - logit.max(axis=1, keepdims=True))
        cdf = np.cumsum(p, axis=1)
        u = cloud.lcg.uniforms(len(move)) * cdf[:, -1]
        choice = np.minimum((cdf <= u[:, None]).sum(axis=1), len(exits) - 1)
        cloud.floor[:] = new_floor
        sample_gaussian_reachable(cloud, move, exits[choice, 0], exits[choice, 1], config.exit_spread, target)
        cloud.w[move] = 1.0 / cloud.n
    cloud.floor[:] = new_floor
    cloud.prev_x[:] = cloud.x
    cloud.prev_y[:] = cloud.y
    cloud.normalize()
    mask = np.zeros(cloud.n, dtype=bool)
    mask[move] = True
    return mask
