"""Streaming weighted k-means over particle positions and position output."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .cloud import TWO_PI, Cloud


@dataclass
class Cluster:
    center: tuple
    mean_state: np.ndarray  # x, y, epsilon, beta
    covariance: np.ndarray
    weight: float
    members: int
    floor: int = 0

    @property
    def epsilon(self) -> float:
        return float(self.mean_state[2])

    @property
    def beta(self) -> float:
        return float(self.mean_state[3])


@dataclass(frozen=True)
class Estimate:
    t: float
    x: float
    y: float
    floor: int
    covariance: np.ndarray
    cluster_weight: float


def _seed_centers(cloud: Cloud, k: int) -> np.ndarray:
    cdf = np.cumsum(cloud.w)
    u = cloud.lcg.uniforms(k) * cdf[-1]
    idx = np.minimum(np.searchsorted(cdf, u, side="right"), cloud.n - 1)
    return np.column_stack([cloud.x[idx], cloud.y[idx]])


@njit(cache=True)
def _lloyd_kernel(x, y, w, eps, beta, centers):
    """Assign to the nearest centre (lowest index on ties) and accumulate per-cluster sums.

    Returns (assign, acc) with acc columns: count, W, Sx, Sy, Seps, Ssin, Scos.
    """
    n = x.shape[0]
    k = centers.shape[0]
    assign = np.empty(n, dtype=np.int64)
    acc = np.zeros((k, 7))
    for i in range(n):
        best = 0
        bd = np.inf
        for j in range(k):
            dx = x[i] - centers[j, 0]
            dy = y[i] - centers[j, 1]
            d = dx * dx + dy * dy
            if d < bd:
                bd = d
                best = j
        assign[i] = best
        wi = w[i]
        acc[best, 0] += 1.0
        acc[best, 1] += wi
        acc[best, 2] += wi * x[i]
        acc[best, 3] += wi * y[i]
        acc[best, 4] += wi * eps[i]
        acc[best, 5] += wi * math.sin(beta[i])
        acc[best, 6] += wi * math.cos(beta[i])
    return assign, acc


@njit(cache=True)
def _cov_kernel(x, y, w, assign, mx, my, k):
    cov = np.zeros((k, 3))
    for i in range(x.shape[0]):
        j = assign[i]
        dx = x[i] - mx[j]
        dy = y[i] - my[j]
        cov[j, 0] += w[i] * dx * dx
        cov[j, 1] += w[i] * dx * dy
        cov[j, 2] += w[i] * dy * dy
    return cov


def kmeans_step(cloud: Cloud, clusters: list, k: int) -> list:
    """One weighted Lloyd iteration seeded by the previous epoch's centres."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if clusters:
        centers = np.array([c.center for c in clusters], dtype=float)
    else:
        centers = _seed_centers(cloud, k)
    k = len(centers)
    x, y, w = cloud.x, cloud.y, cloud.w
    assign, acc = _lloyd_kernel(x, y, w, cloud.epsilon, cloud.beta, centers)
    count = acc[:, 0]
    W = acc[:, 1]
    safe = np.where(W > 0, W, 1.0)
    mx = acc[:, 2] / safe
    my = acc[:, 3] / safe
    me = acc[:, 4] / safe
    mb = np.mod(np.arctan2(acc[:, 5], acc[:, 6]), TWO_PI)
    unweighted = (count > 0) & (W <= 0)
    for j in np.flatnonzero(unweighted):
        # members carry no weight: keep the plain mean as the centre
        m = assign == j
        mx[j], my[j] = x[m].mean(), y[m].mean()
    cov = _cov_kernel(x, y, w, assign, mx, my, k) / safe[:, None]
    floors = cloud.floors()
    if len(floors) == 1:
        cfloor = np.full(k, floors[0])
    else:
        mass = np.stack([np.bincount(assign, w * (cloud.floor == f), minlength=k) for f in floors])
        cfloor = floors[np.argmax(mass, axis=0)]
    heaviest = int(np.argmax(w))
    out = []
    for j in range(k):
        if count[j] == 0:
            px, py = float(x[heaviest]), float(y[heaviest])
            state = np.array([px, py, cloud.epsilon[heaviest], cloud.beta[heaviest]])
            out.append(Cluster((px, py), state, np.zeros((2, 2)), 0.0, 0, int(cloud.floor[heaviest])))
            continue
        cx, cy = float(mx[j]), float(my[j])
        c = np.array([[cov[j, 0], cov[j, 1]], [cov[j, 1], cov[j, 2]]])
        out.append(Cluster((cx, cy), np.array([cx, cy, me[j], mb[j]]), c, float(W[j]), int(count[j]),
                           int(cfloor[j])))
    return out


def merge_clusters(clusters: list, radius: float) -> list:
    """Fuse clusters whose centres lie within ``radius`` of a heavier one.

    Weights add; means, covariances (parallel-axis) and misalignment
    (circular mean) are combined by weight.
    """
    order = sorted(range(len(clusters)), key=lambda j: (-clusters[j].weight, j))
    groups = []
    for j in order:
        c = clusters[j]
        for g in groups:
            h = clusters[g[0]]
            if math.hypot(c.center[0] - h.center[0], c.center[1] - h.center[1]) <= radius:
                g.append(j)
                break
        else:
            groups.append([j])
    merged = []
    for g in sorted(groups, key=min):
        cs = [clusters[j] for j in g]
        if len(cs) == 1:
            merged.append(cs[0])
            continue
        W = sum(c.weight for c in cs)
        wts = np.array([c.weight for c in cs]) / W if W > 0 else np.full(len(cs), 1 / len(cs))
        means = np.array([c.mean_state for c in cs])
        mxy = wts @ means[:, :2]
        cov = sum(wi * (c.covariance + np.outer(c.mean_state[:2] - mxy, c.mean_state[:2] - mxy))
                  for wi, c in zip(wts, cs))
        beta = math.atan2(float(wts @ np.sin(means[:, 3])), float(wts @ np.cos(means[:, 3]))) % TWO_PI
        state = np.array([mxy[0], mxy[1], float(wts @ means[:, 2]), beta])
        heavy = max(cs, key=lambda c: c.weight)
        merged.append(Cluster((float(mxy[0]), float(mxy[1])), state, cov, float(W),
                              sum(c.members for c in cs), heavy.floor))
    return merged


def best_cluster(clusters: list) -> Cluster:
    if not clusters:
        raise ValueError("need at least one cluster")
    return max(enumerate(clusters), key=lambda jc: (jc[1].weight, -jc[0]))[1]


def output_estimate(clusters: list, t: float = 0.0) -> Estimate:
    """Mean and covariance of the heaviest cluster (lowest index on ties)."""
    c = best_cluster(clusters)
    return Estimate(t, float(c.mean_state[0]), float(c.mean_state[1]), c.floor, c.covariance.copy(), c.weight)


def short_term_predict(last: Estimate, steps, cluster: Cluster) -> Estimate:
    """Dead-reckon ``last`` through raw steps using the cluster's mean epsilon and beta."""
    x, y, t = last.x, last.y, last.t
    scale = 1.0 + cluster.epsilon
    for s in steps:
        a = s.heading + cluster.beta
        x += s.length * scale * math.cos(a)
        y += s.length * scale * math.sin(a)
        t = max(t, s.t)
    return Estimate(t, x, y, last.floor, last.covariance, last.cluster_weight)
