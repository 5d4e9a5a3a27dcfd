"""SIR particle filter with map constraints, zones, partial resampling and clustering."""

from .cloud import Cloud, Global, KnownPose, KnownPosition, Particle, init_cloud
from .clustering import (Cluster, Estimate, kmeans_step, merge_clusters, output_estimate,
                         short_term_predict)
from .config import FilterConfig, NoiseConfig, config_from_dict, config_to_dict, load_config
from .engine import Engine
from .ops import (CollisionStats, NoStairway, Trigger, UpdateEpoch, aggregate_steps, apply_collisions,
                  apply_dpc, epoch_trigger, handle_floor_change, measurement_update, partial_resample,
                  predict, recover_all_dead)

__all__ = [
    "Cloud", "Cluster", "CollisionStats", "Engine", "Estimate", "FilterConfig", "Global", "KnownPose",
    "KnownPosition", "NoStairway", "NoiseConfig", "Particle", "Trigger", "UpdateEpoch", "aggregate_steps",
    "apply_collisions", "apply_dpc", "config_from_dict", "config_to_dict", "epoch_trigger",
    "handle_floor_change", "init_cloud", "kmeans_step", "load_config", "measurement_update",
    "merge_clusters", "output_estimate", "partial_resample", "predict", "recover_all_dead",
    "short_term_predict",
]
