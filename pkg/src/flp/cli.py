"""Command-line entry point: ``flp run | bench | synth | oracle-check | export-suite``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import yaml

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_ENGINE = 3

def _u32(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**32:
        raise argparse.ArgumentTypeError("seed must be an unsigned 32-bit integer")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _configs(path):
    from .filter import FilterConfig, NoiseConfig, load_config

    if path is None:
        return FilterConfig(), NoiseConfig()
    return load_config(path)


def _load_inputs(args):
    from .harness import load_scenario
    from .map_core import load_map

    map_model = load_map(args.map) if getattr(args, "map", None) else None
    scn = load_scenario(args.scenario, map_model)
    scn.check_feasible()
    return scn


def cmd_run(args) -> int:
    from .harness import run_benchmark

    scn = _load_inputs(args)
    fc, nc = _configs(args.config)
    result = run_benchmark([scn], fc, nc, seeds=[args.seed], out_dir=args.out, mode=args.mode,
                           plots=not args.no_plot)
    for r in result.runs:
        if r.error:
            print(f"{r.name}: engine failure: {r.error}", file=sys.stderr)
            return EXIT_ENGINE
        m = r.metrics
        print(f"{r.name}: D5 {m.d5:.1f} %  D10 {m.d10:.1f} %  RMSE {m.rmse:.2f} m  {m.verdict.value}")
    return EXIT_OK


def cmd_bench(args) -> int:
    from .harness import load_suite, run_benchmark

    scenarios = load_suite(args.suite)
    for scn in scenarios:
        scn.check_feasible()
    fc, nc = _configs(args.config)
    seeds = range(args.seed0, args.seed0 + args.seeds)
    t0 = time.perf_counter()
    result = run_benchmark(scenarios, fc, nc, seeds=seeds, out_dir=args.out, mode=args.mode,
                           workers=args.workers, plots=not args.no_plot)
    rows = result.aggregate()
    if not rows:
        print("empty suite: nothing to run")
    for row in rows:
        print(f"{row['scenario']:<12} runs {row['runs']:>3}  D5 {row['D5']:6.1f} %  D10 {row['D10']:6.1f} %  "
              f"RMSE {row['RMSE']:6.2f} m  failed {row['failed']}")
    print(f"{len(result.runs)} runs in {time.perf_counter() - t0:.1f} s; report in {args.out}")
    for r in result.failures:
        print(f"{r.name}: engine failure: {r.error}", file=sys.stderr)
    return EXIT_ENGINE if result.failures else EXIT_OK


def cmd_synth(args) -> int:
    from .harness import synthesize_sensors, write_trace

    scn = _load_inputs(args)
    trace = synthesize_sensors(scn, seed=args.seed, mode=args.mode)
    out = write_trace(trace, args.out)
    print(f"{len(trace.events)} events, {len(trace.truth)} truth samples written to {out}")
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    from .harness.oracle import oracle_sweep, pruning_ratio

    t0 = time.perf_counter()
    res = oracle_sweep(args.scenes, args.seed)
    ratio = pruning_ratio(seed=args.seed)
    ok = res.disagreements == 0 and res.max_point_error <= 1e-9 and ratio >= 5.0
    print(f"scenes {res.scenes}  hits {res.hits}  disagreements {res.disagreements}  "
          f"max hit-point error {res.max_point_error:.2e} m")
    print(f"pruning: {ratio:.1f}x fewer exact tests than all-pairs on the 100-wall partition")
    print(f"{'PASS' if ok else 'FAIL'} in {time.perf_counter() - t0:.1f} s")
    return EXIT_OK if ok else EXIT_ENGINE


def cmd_export_suite(args) -> int:
    from .harness import builtin_suite, save_scenario
    from .map_core import save_map

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for scn in builtin_suite(args.name):
        map_file = f"{scn.name}.map.json"
        save_map(scn.map, out / map_file)
        save_scenario(scn, out / f"{scn.name}.json", map_ref=map_file)
        print(f"wrote {out / (scn.name + '.json')}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="flp", description="Fused indoor localization engine and benchmark harness.")
    p.add_argument("-v", "--verbose", action="store_true", help="log engine warnings")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="replay one scenario with one seed")
    r.add_argument("--map", help="map JSON (overrides the scenario's map reference)")
    r.add_argument("--scenario", required=True)
    r.add_argument("--config", help="flat YAML/JSON filter config")
    r.add_argument("--seed", type=_u32, default=0)
    r.add_argument("--out", default="flp_out")
    r.add_argument("--mode", choices=["events", "imu"], default="events")
    r.add_argument("--no-plot", action="store_true")
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("bench", help="run a scenario suite over several seeds")
    b.add_argument("--suite", required=True, help="directory of scenario JSON files, or a built-in name")
    b.add_argument("--seeds", type=_positive, default=10)
    b.add_argument("--seed0", type=_u32, default=0, help="first seed")
    b.add_argument("--config")
    b.add_argument("--out", default="flp_bench")
    b.add_argument("--mode", choices=["events", "imu"], default="events")
    b.add_argument("--workers", type=_positive, default=1)
    b.add_argument("--no-plot", action="store_true")
    b.set_defaults(func=cmd_bench)

    s = sub.add_parser("synth", help="write the synthetic sensor trace of a scenario")
    s.add_argument("--scenario", required=True)
    s.add_argument("--map")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=_u32, default=None)
    s.add_argument("--mode", choices=["events", "imu"], default="events")
    s.set_defaults(func=cmd_synth)

    o = sub.add_parser("oracle-check", help="compare the pruned collision kernel with the brute-force oracle")
    o.add_argument("--scenes", type=_positive, default=10_000)
    o.add_argument("--seed", type=_u32, default=0)
    o.set_defaults(func=cmd_oracle_check)

    e = sub.add_parser("export-suite", help="write a built-in suite as map and scenario JSON files")
    e.add_argument("--name", default="all")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_export_suite)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_VALIDATION
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    from .harness import EngineFailure

    try:
        return args.func(args)
    except EngineFailure as exc:
        print(f"engine failure: {exc}", file=sys.stderr)
        return EXIT_ENGINE
    except (ValueError, KeyError, OSError, json.JSONDecodeError, yaml.YAMLError, TypeError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:
        print(f"engine failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ENGINE


if __name__ == "__main__":
    sys.exit(main())
