"""Scenario synthesis, replay, metrics, oracles and benchmark output."""

from ..rng import Lcg, lcg_next
from .bench import (BenchmarkResult, EngineFailure, RunResult, make_prior, replay, run_benchmark,
                    run_scenario, write_outputs)
from .metrics import MetricsReport, NoOverlap, Verdict, compute_metrics, held_positions, verdict_for
from .oracle import OracleHit, naive_collision_oracle, naive_crossings
from .scenario import (GroundTruth, InfeasibleScenario, Prior, Scenario, Waypoint, interpolate_ground_truth,
                       load_scenario, save_scenario, scenario_from_dict, scenario_to_dict)
from .suites import BUILTIN, builtin_suite, load_suite
from .synth import Trace, synthesize_sensors
from .traces import read_trace, write_trace

__all__ = [
    "BUILTIN", "BenchmarkResult", "EngineFailure", "GroundTruth", "InfeasibleScenario", "Lcg",
    "MetricsReport", "NoOverlap", "OracleHit", "Prior", "RunResult", "Scenario", "Trace", "Verdict",
    "Waypoint", "builtin_suite", "compute_metrics", "held_positions", "interpolate_ground_truth",
    "lcg_next", "load_scenario", "load_suite", "make_prior", "naive_collision_oracle", "naive_crossings",
    "read_trace", "replay", "run_benchmark", "run_scenario", "save_scenario", "scenario_from_dict",
    "scenario_to_dict", "synthesize_sensors", "verdict_for", "write_outputs", "write_trace",
]
