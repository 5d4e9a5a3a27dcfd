"""Sensor and measurement synthesis from a scenario's ground truth."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from ..map_core import ZoneKind
from ..measurements import GnssFix, RssObservation, rss_from_distance
from ..pdr import DpcFlag, FloorEvent, ImuStream, StepEvent, StepModelParams, altitude_to_pressure
from ..pdr.steps import FREQ_MAX, FREQ_MIN, frequency_for_speed, step_length
from .scenario import TRUTH_RATE, GroundTruth, Scenario, interpolate_ground_truth

G = 9.81
IMU_FS = 50.0
WALK_AMPLITUDE = 2.0
DPC_TILT = math.radians(40.0)
DEFAULT_STAIR_STEP = 0.3

# order of simultaneous events when replaying a trace
_PRIORITY = {DpcFlag: 0, FloorEvent: 1, StepEvent: 2, RssObservation: 3, GnssFix: 4}


@dataclass
class Leg:
    t0: float
    t1: float
    a: tuple
    b: tuple
    floor0: int
    floor1: int
    n_steps: int
    stair: bool

    @property
    def length(self) -> float:
        return math.dist(self.a, self.b)

    @property
    def cadence(self) -> float:
        return self.n_steps / (self.t1 - self.t0) if self.n_steps else 0.0

    def at(self, t: float) -> tuple:
        u = (t - self.t0) / (self.t1 - self.t0)
        return (self.a[0] + u * (self.b[0] - self.a[0]), self.a[1] + u * (self.b[1] - self.a[1]))


@dataclass
class Trace:
    """Synthesised inputs for one run.

    ``events`` is time ordered and holds either every filter-level event
    (events mode) or only the radio measurements (IMU mode, where steps,
    DPC flags and floor changes come from ``imu`` via the PDR front-end).
    """
    scenario: str
    seed: int
    truth: GroundTruth
    events: list
    imu: ImuStream | None = None
    imu_fs: float | None = None
    map_model: object = None


def _stair_zone(scn: Scenario, floor: int, p) -> object | None:
    try:
        fl = scn.map.floor(floor)
    except Exception:
        return None
    for z in fl.zones_of(ZoneKind.STAIRWAY):
        if z.contains(np.array([p]))[0]:
            return z
    return None


def plan_legs(scn: Scenario) -> list:
    """Split the walk into legs with a whole number of steps each.

    Level legs step at the cadence whose model step length times cadence
    equals the leg speed; stair legs step at the zone's stair step length.
    """
    scn.check_feasible()
    params = StepModelParams(user_height=scn.user_height)
    legs = []
    for w0, w1 in zip(scn.waypoints, scn.waypoints[1:]):
        T = w1.t - w0.t
        d = math.dist(w0.position, w1.position)
        mid = ((w0.position[0] + w1.position[0]) / 2, (w0.position[1] + w1.position[1]) / 2)
        zone = _stair_zone(scn, w0.floor, mid) or _stair_zone(scn, w1.floor, mid)
        stair = w0.floor != w1.floor or zone is not None
        if d == 0:
            n = 0
        elif stair:
            ls = zone.stairway_step_length if zone is not None else DEFAULT_STAIR_STEP
            n = max(1, round(d / ls))
        else:
            f = min(max(frequency_for_speed(d / T, params), FREQ_MIN), FREQ_MAX)
            n = max(1, round(T * f))
        legs.append(Leg(w0.t, w1.t, tuple(w0.position), tuple(w1.position), w0.floor, w1.floor, n, stair))
    return legs


def _streams(seed: int, n: int):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def synthesize_steps(scn: Scenario, legs, rng) -> list:
    """Step events along the legs with the scenario's length and heading errors."""
    params = StepModelParams(user_height=scn.user_height)
    out = []
    for leg in legs:
        if leg.n_steps == 0:
            continue
        T = leg.t1 - leg.t0
        dx, dy = leg.b[0] - leg.a[0], leg.b[1] - leg.a[1]
        theta = math.atan2(dy, dx)
        true_len = leg.length / leg.n_steps
        freq = min(max(leg.n_steps / T, FREQ_MIN), FREQ_MAX)
        for k in range(1, leg.n_steps + 1):
            t = leg.t0 + k * T / leg.n_steps
            length = true_len * (1.0 + scn.step_scale_error)
            if scn.step_length_noise > 0:
                length *= 1.0 + rng.normal(0.0, scn.step_length_noise)
            if leg.stair:
                # the filter substitutes the stair step length; report the model value
                length = step_length(freq, params)
            heading = theta - scn.misalignment(t) + scn.heading_drift * (t - scn.t_start)
            if scn.heading_noise > 0:
                heading += rng.normal(0.0, scn.heading_noise)
            out.append(StepEvent(t, max(length, 1e-6), heading, freq))
    return out


def _user_heading(legs, t: float) -> float:
    """Walking direction at ``t`` (the last moving leg's direction while standing)."""
    h = 0.0
    for leg in legs:
        if leg.length > 0:
            h = math.atan2(leg.b[1] - leg.a[1], leg.b[0] - leg.a[0])
        if leg.t1 >= t and leg.length > 0:
            break
    return h


def synthesize_dpc(scn: Scenario, legs) -> list:
    out = []
    for td, delta in scn.device_schedule:
        theta = _user_heading(legs, td)
        before = theta - scn.misalignment(td - 1e-9)
        after = before - delta
        # the window closes when the new misalignment takes effect
        out.append(DpcFlag(td - scn.dpc_duration, td, before, after))
    return out


def synthesize_floor_events(scn: Scenario, legs) -> list:
    heights = {f.index: f.height for f in scn.map.floors}
    out = []
    for leg in legs:
        if leg.floor0 != leg.floor1:
            out.append(FloorEvent(leg.t1 + scn.floor_latency, heights[leg.floor1] - heights[leg.floor0],
                                  leg.floor1, scn.floor_latency))
    return out


def synthesize_rss(scn: Scenario, truth: GroundTruth, rng) -> list:
    if scn.rss_rate <= 0:
        return []
    heights = {f.index: f.height for f in scn.map.floors}
    beacons = list(scn.map.beacons.values())
    out = []
    t = scn.t_start
    while t <= scn.t_end + 1e-9:
        i = min(int(round((t - truth.t[0]) * TRUTH_RATE)), len(truth) - 1)
        x, y = truth.position(t)
        fl = int(truth.floor[i])
        for b in beacons:
            if b.floor != fl and not scn.cross_floor_rss:
                continue
            dz = heights[b.floor] - heights[fl]
            d = math.sqrt((x - b.position[0]) ** 2 + (y - b.position[1]) ** 2 + dz * dz)
            rss = rss_from_distance(d) + rng.normal(0.0, scn.beacon_noise_sigma)
            if rss >= scn.rss_floor:
                out.append(RssObservation(t, b.id, float(min(max(rss, -120.0), 0.0))))
        t += 1.0 / scn.rss_rate
    return out


def synthesize_gnss(scn: Scenario, truth: GroundTruth, rng) -> list:
    out = []
    for t0, t1 in scn.gnss_zones:
        t = max(t0, scn.t_start)
        while t <= min(t1, scn.t_end) + 1e-9:
            x, y = truth.position(t)
            e = rng.normal(0.0, scn.gnss_sigma, 2)
            out.append(GnssFix(t, (x + e[0], y + e[1]), scn.gnss_sigma))
            t += 1.0 / scn.gnss_rate
    return out


def synthesize_imu(scn: Scenario, legs, rng, fs: float = IMU_FS) -> ImuStream:
    """Body-frame accelerometer, gyroscope and pressure for the walk.

    The device yaw is the walking direction minus the misalignment. Each
    scheduled device change ramps the misalignment and toggles a tilt of
    the device vertical over the ``dpc_duration`` seconds before it. The
    vertical load oscillates at the step cadence while walking.
    """
    t = scn.t_start + np.arange(int(math.floor((scn.t_end - scn.t_start) * fs)) + 1) / fs
    n = len(t)
    leg_idx = np.clip(np.searchsorted([lg.t0 for lg in legs], t, side="right") - 1, 0, len(legs) - 1)
    cadence = np.array([legs[i].cadence for i in leg_idx])
    theta = np.array([_user_heading(legs, ti) for ti in t])
    theta = np.unwrap(theta)
    k = max(1, int(0.5 * fs))
    theta = np.convolve(np.pad(theta, (k, k), mode="edge"), np.ones(2 * k + 1) / (2 * k + 1), "valid")
    ma = np.full(n, scn.initial_misalignment)
    tilt = np.zeros(n)
    level = 0.0
    for j, (td, delta) in enumerate(scn.device_schedule):
        ramp = np.clip((t - td + scn.dpc_duration) / scn.dpc_duration, 0.0, 1.0)
        ma += delta * ramp
        target = DPC_TILT if j % 2 == 0 else 0.0
        tilt += (target - level) * ramp
        level = target
    yaw = theta - ma
    rot = Rotation.from_euler("ZX", np.column_stack([yaw, tilt]))
    phase = 2 * np.pi * np.cumsum(cadence) / fs
    load = G + WALK_AMPLITUDE * np.sin(phase) * (cadence > 0)
    acc_world = np.column_stack([np.zeros(n), np.zeros(n), load])
    acc = rot.inv().apply(acc_world)
    rel = rot[:-1].inv() * rot[1:]
    gyro = np.vstack([rel.as_rotvec() * fs, np.zeros((1, 3))])
    acc += rng.normal(0.0, 0.02, acc.shape)
    gyro += rng.normal(0.0, 0.002, gyro.shape)
    heights = {f.index: f.height for f in scn.map.floors}
    alt = np.empty(n)
    for i, ti in enumerate(t):
        lg = legs[leg_idx[i]]
        u = min(max((ti - lg.t0) / (lg.t1 - lg.t0), 0.0), 1.0)
        alt[i] = heights[lg.floor0] + u * (heights[lg.floor1] - heights[lg.floor0])
    pressure = np.full(n, np.nan)
    every = max(1, int(round(fs / 10.0)))
    pressure[::every] = altitude_to_pressure(alt[::every])
    return ImuStream(t, acc, gyro, pressure)


def _event_key(e):
    return (e.t, _PRIORITY[type(e)])


def synthesize_sensors(scn: Scenario, seed: int | None = None, mode: str = "events") -> Trace:
    """Generate a full, deterministic input trace for ``scn``.

    ``mode="events"`` emits step, DPC and floor events directly;
    ``mode="imu"`` emits a raw IMU/pressure stream instead. Radio
    measurements are emitted in both modes. Raises InfeasibleScenario when
    a leg would need more than 2.5 m/s.
    """
    if mode not in ("events", "imu"):
        raise ValueError("mode must be 'events' or 'imu'")
    seed = scn.seed if seed is None else seed
    legs = plan_legs(scn)
    truth = interpolate_ground_truth(scn.waypoints, scn.map)
    r_steps, r_rss, r_gnss, r_imu = _streams(seed, 4)
    events = synthesize_rss(scn, truth, r_rss) + synthesize_gnss(scn, truth, r_gnss)
    imu = None
    if mode == "events":
        events += synthesize_steps(scn, legs, r_steps) + synthesize_dpc(scn, legs)
        events += synthesize_floor_events(scn, legs)
    else:
        imu = synthesize_imu(scn, legs, r_imu)
    events.sort(key=_event_key)
    return Trace(scn.name, seed, truth, events, imu, IMU_FS if imu is not None else None, scn.map)
