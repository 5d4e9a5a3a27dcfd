"""Event-driven localization engine wrapping the particle filter."""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import replace

import numpy as np

from ..map_core import MapModel, PartitionCache
from ..measurements import GnssFix, RssModelParams, RssObservation
from ..pdr import DpcFlag, FloorEvent, ImuSample, PdrFrontEnd, StepEvent, StepModelParams
from .cloud import Prior, init_cloud
from .clustering import Estimate, best_cluster, kmeans_step, merge_clusters, output_estimate, short_term_predict
from .config import FilterConfig, NoiseConfig
from .ops import (CollisionStats, NoStairway, UpdateEpoch, apply_collisions, apply_dpc, epoch_trigger,
                  handle_floor_change, measurement_update, partial_resample, policy_from_config, predict)

log = logging.getLogger(__name__)

_HISTORY_SECONDS = 30.0


class Engine:
    """Fuses step, DPC, floor, RSS and GNSS events into position estimates.

    Feed events in time order with :meth:`feed`; raw ``ImuSample`` input
    is buffered and run through the PDR front-end in ``imu_chunk``-second
    chunks. :meth:`poll` returns the latest estimate, dead-reckoned
    through any steps received since the last filter epoch. Every estimate
    is also appended to :attr:`track`.
    """

    def __init__(self, map_model: MapModel, config: FilterConfig = FilterConfig(), prior: Prior = None,
                 seed: int = 0, noise: NoiseConfig = NoiseConfig(),
                 rss_params: RssModelParams = RssModelParams(), imu_fs: float | None = None,
                 imu_chunk: float = 1.0):
        if prior is None:
            raise ValueError("a prior is required")
        self.map = map_model
        self.config = config
        self.noise = noise
        self.rss_params = rss_params
        self.cloud = init_cloud(prior, config, map_model, seed)
        self.cache = PartitionCache(self._load, config.cache_slots)
        self.policy = policy_from_config(config)
        self.stats = CollisionStats()
        self.pending_steps: list = []
        self.pending_meas: list = []
        self.history: deque = deque()
        self.epochs = 0
        self.imu_fs = imu_fs
        self.imu_chunk = imu_chunk
        self._imu_buf: list = []
        self._front = None
        self.clusters = kmeans_step(self.cloud, [], config.n_clusters)
        t0 = 0.0
        self._anchor = output_estimate(self.hypotheses(), t0)
        self._estimate = self._anchor
        self.track: list = [self._estimate]

    def _load(self, key):
        f, pid = key
        return self.map.floor(f).partition(pid)

    # --- public API ------------------------------------------------------------

    def feed(self, item):
        if isinstance(item, ImuSample):
            self._feed_imu(item)
        elif isinstance(item, StepEvent):
            self.pending_steps.append(item)
            ep = self._make_epoch()
            if ep is not None:
                self._run_epoch(ep)
            else:
                self._estimate = short_term_predict(self._anchor, self.pending_steps, self._best)
                self.track.append(self._estimate)
        elif isinstance(item, (RssObservation, GnssFix)):
            self.pending_meas.append(item)
            self._maybe_epoch()
        elif isinstance(item, DpcFlag):
            if item.t_end is None:
                return
            self.flush(item.t)
            if not (math.isnan(item.heading_before) or math.isnan(item.heading_after)):
                apply_dpc(self.cloud, self.config, item.heading_before, item.heading_after)
                self._recluster(item.t)
        elif isinstance(item, FloorEvent):
            self.flush(item.t)
            self._floor_change(item)
        else:
            raise TypeError(f"cannot feed {type(item).__name__}")

    def poll(self) -> Estimate:
        return self._estimate

    def flush(self, t: float | None = None):
        """Force an epoch for any pending steps (and buffered IMU input when ``t`` is None)."""
        if self._imu_buf and t is None:
            self._drain_imu()
        if self.pending_steps:
            self._run_epoch(self._make_epoch(force=True))

    def hypotheses(self) -> list:
        return merge_clusters(self.clusters, self.config.cluster_merge_radius)

    # --- internals ---------------------------------------------------------------

    @property
    def _best(self):
        return best_cluster(self.hypotheses())

    def _make_epoch(self, force=False):
        ep = epoch_trigger(self.pending_steps, self.pending_meas, self.config)
        if ep is None and force and self.pending_steps:
            # a forced flush uses the same aggregation with a lowered step quota
            ep = epoch_trigger(self.pending_steps, self.pending_meas,
                               _with_steps(self.config, len(self.pending_steps)))
        return ep

    def _maybe_epoch(self):
        ep = self._make_epoch()
        if ep is not None:
            self._run_epoch(ep)

    def _run_epoch(self, ep: UpdateEpoch):
        self.pending_steps = []
        self.pending_meas = []
        cloud = self.cloud
        predict(cloud, ep, self.noise, self.map, self.config)
        apply_collisions(cloud, self.map, self.cache, self.config, self.policy, self.stats)
        measurement_update(cloud, ep.measurements, self.map, self.config, self.rss_params)
        partial_resample(cloud, self.config, self.map, self._beacon_anchor(ep))
        cloud.epoch += 1
        self.epochs += 1
        self.history.append(ep)
        while self.history and ep.t - self.history[0].t > _HISTORY_SECONDS:
            self.history.popleft()
        self._recluster(ep.t)

    def _recluster(self, t: float):
        self.clusters = kmeans_step(self.cloud, self.clusters, self.config.n_clusters)
        self._anchor = output_estimate(self.hypotheses(), t)
        self._estimate = self._anchor
        self.track.append(self._estimate)

    def _beacon_anchor(self, ep: UpdateEpoch):
        for m in ep.measurements:
            if isinstance(m, RssObservation) and m.rss >= self.config.high_rss_threshold:
                b = self.map.beacon(m.beacon_id)
                if b.floor == self.cloud.dominant_floor():
                    return b
        return None

    def _floor_change(self, ev: FloorEvent):
        try:
            moved = handle_floor_change(self.cloud, ev.new_floor, self.map, self.config)
        except NoStairway as exc:
            log.warning("%s; cloud re-initialised", exc)
            self._recluster(ev.t)
            return
        if ev.latency > 0 and moved.any():
            # walk the relocated particles through the epochs since the transition ended
            for past in [e for e in self.history if e.t > ev.t - ev.latency]:
                predict(self.cloud, past, self.noise, self.map, self.config, mask=moved)
                apply_collisions(self.cloud, self.map, self.cache, self.config, self.policy, self.stats)
        self.clusters = []
        self._recluster(ev.t)

    def _feed_imu(self, s: ImuSample):
        self._imu_buf.append(s)
        if self._front is None:
            if self.imu_fs is None:
                if len(self._imu_buf) < 11:
                    return
                self.imu_fs = 1.0 / float(np.median(np.diff([b.t for b in self._imu_buf])))
            fl = self.cloud.dominant_floor()
            heights = self.map.floor_heights
            self._front = PdrFrontEnd(self.imu_fs, StepModelParams(user_height=self.config.user_height),
                                      heights, fl, self.map.floors[0].index)
        if self._imu_buf[-1].t - self._imu_buf[0].t >= self.imu_chunk - 1e-9:
            self._drain_imu()

    def _drain_imu(self):
        if self._front is None or not self._imu_buf:
            return
        chunk, self._imu_buf = self._imu_buf, []
        for ev in self._front.process(chunk):
            self.feed(ev)


def _with_steps(cfg: FilterConfig, n: int) -> FilterConfig:
    return replace(cfg, steps_per_epoch=max(1, n))
