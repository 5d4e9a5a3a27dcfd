"""Filter and process-noise configuration, loadable from flat YAML/JSON files."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import yaml


@dataclass(frozen=True)
class NoiseConfig:
    """Process-noise standard deviations applied once per prediction epoch.

    Zero values are accepted so that noise-free runs can be replayed.
    """
    sigma_epsilon: float = 0.01
    sigma_beta: float = math.radians(0.5)
    sigma_d: float = 0.1
    sigma_alpha: float = math.radians(1.0)

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError(f"{f.name} must be finite and >= 0")

    @classmethod
    def zero(cls) -> "NoiseConfig":
        return cls(0.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class FilterConfig:
    n_particles: int = 1000
    n_clusters: int = 5
    resample_weight_threshold: float | None = None  # None -> 0.1 / n_particles
    dpc_uniform_fraction: float = 0.5
    high_rss_threshold: float = -60.0
    high_rss_count: int = 1
    beacon_resample_radius: float = 3.0
    stairway_decay_lambda: float = 10.0
    steps_per_epoch: int = 3
    accessibility: bool = True
    cluster_merge_radius: float = 3.0
    resample_jitter: float = 0.1
    epsilon_init_sigma: float = 0.05
    epsilon_limit: float = 0.5
    spawn_wall_clearance: float = 0.1
    exit_spread: float = 1.0
    cache_slots: int = 5
    user_height: float = 1.75
    grazing_angle_deg: float = 20.0
    wall_margin: float = 0.02
    head_on_fraction: float = 0.8
    corrections: bool = True

    def __post_init__(self):
        for name in ("n_particles", "n_clusters", "high_rss_count", "steps_per_epoch", "cache_slots"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.resample_weight_threshold is None:
            object.__setattr__(self, "resample_weight_threshold", 0.1 / self.n_particles)
        for name in ("beacon_resample_radius", "stairway_decay_lambda", "resample_weight_threshold",
                     "exit_spread"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if not 0.0 <= self.dpc_uniform_fraction <= 1.0:
            raise ValueError("dpc_uniform_fraction must lie in [0, 1]")
        if not 0.0 < self.epsilon_limit <= 0.5:
            raise ValueError("epsilon_limit must lie in (0, 0.5]")


def load_config(path) -> tuple[FilterConfig, NoiseConfig]:
    """Read a flat key/value file (YAML or JSON) holding any config fields."""
    text = Path(path).read_text()
    doc = yaml.safe_load(text) if text.strip() else {}
    return config_from_dict(doc or {})


def config_from_dict(doc: dict) -> tuple[FilterConfig, NoiseConfig]:
    if not isinstance(doc, dict):
        raise ValueError("config must be a flat mapping")
    fkeys = {f.name for f in fields(FilterConfig)}
    nkeys = {f.name for f in fields(NoiseConfig)}
    unknown = set(doc) - fkeys - nkeys
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    nested = [k for k, v in doc.items() if isinstance(v, (dict, list))]
    if nested:
        raise ValueError(f"config must be flat; nested values under {nested}")
    fc = FilterConfig(**{k: v for k, v in doc.items() if k in fkeys})
    nc = NoiseConfig(**{k: float(v) for k, v in doc.items() if k in nkeys})
    return fc, nc


def config_to_dict(fc: FilterConfig, nc: NoiseConfig) -> dict:
    return {**asdict(fc), **asdict(nc)}
