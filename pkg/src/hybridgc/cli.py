"""Command line front end.

Exit status: 0 on success, 1 when a simulation run fails (heap
exhaustion or a trace error mid-run), 2 for bad usage or configuration.
"""

from __future__ import annotations

import argparse
import os
import sys

from .config import Collector
from .errors import ConfigError, SimulatorError, TraceError
from .harness import (
    ExperimentConfig,
    config_for_archetype,
    emit_report,
    run_baseline_pair,
    run_experiment,
    sweep,
)
from .memory import LifetimeModel, lifetime_years
from .units import parse_size
from .workloads import ARCHETYPES, default_spec, generate, serialize_trace

COLLECTOR_NAMES = [c.value for c in Collector]


def _add_run_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--collector", default="KG-W", help=f"one of {', '.join(COLLECTOR_NAMES)}")
    p.add_argument("--seed", type=int, required=True, help="master seed (required, no default)")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--archetype", choices=sorted(ARCHETYPES), default="nursery-churn")
    src.add_argument("--trace", metavar="PATH", help="replay a trace file instead of generating")
    p.add_argument("--ops", type=int, default=None, help="override the archetype op count")
    p.add_argument("--instances", type=int, default=1)
    p.add_argument("--nursery", type=parse_size, default=None, metavar="SIZE")
    p.add_argument("--budget", type=parse_size, default=None, metavar="SIZE")
    p.add_argument("--cache", type=parse_size, default=None, metavar="SIZE")
    p.add_argument("--quantum", type=int, default=10_000)
    p.add_argument("--warmup", type=float, default=0.10, metavar="FRACTION")
    p.add_argument("--no-zeroing", action="store_true")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--out", default=None, help="output path (default stdout)")


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    overrides: dict = {"instances": args.instances, "quantum": args.quantum,
                       "warmup_fraction": args.warmup, "zeroing": not args.no_zeroing}
    if args.nursery is not None:
        overrides["nursery_size"] = args.nursery
    if args.budget is not None:
        overrides["heap_budget"] = args.budget
    if args.cache is not None:
        overrides["cache_capacity"] = args.cache
    if args.trace is not None:
        return ExperimentConfig(collector=args.collector, seed=args.seed,
                                trace_path=args.trace, **overrides)
    return config_for_archetype(args.archetype, args.collector, args.seed,
                                op_count=args.ops, **overrides)


def _cmd_run(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    report = run_experiment(config)
    emit_report(report, args.format, args.out or sys.stdout)
    return 1 if report.failed else 0


def _cmd_pair(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    pair = run_baseline_pair(config, baseline=args.baseline)
    emit_report(pair.variant, args.format, args.out or sys.stdout)
    return 1 if (pair.baseline.failed or pair.variant.failed) else 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    caches = [parse_size(s) for s in args.cache_sizes] if args.cache_sizes else [config.cache_capacity]
    counts = args.instance_counts or [config.instances]
    points = sweep(config, args.collectors, caches, counts)
    os.makedirs(args.out_dir, exist_ok=True)
    status = 0
    for label, report in points:
        path = os.path.join(args.out_dir, f"{label}.{args.format}")
        emit_report(report, args.format, path)
        state = "FAILED" if report.failed else "ok"
        print(f"{label}: {state} pcm_write_bytes={report.aggregate.pcm_write_bytes}")
        if report.failed:
            status = 1
    return status


def _cmd_gen_trace(args: argparse.Namespace) -> int:
    spec = default_spec(args.archetype, op_count=args.ops, seed=args.seed)
    if args.out is None:
        serialize_trace(generate(spec), sys.stdout)
    else:
        with open(args.out, "w", encoding="utf-8") as fh:
            serialize_trace(generate(spec), fh)
    return 0


def _cmd_lifetime(args: argparse.Namespace) -> int:
    model = LifetimeModel(
        capacity_bytes=parse_size(args.capacity),
        endurance_writes=args.endurance,
        wear_efficiency=args.efficiency,
    )
    years = lifetime_years(args.rate, model)
    print(f"{years:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hybridgc",
        description="Trace-driven simulator for generational GC on hybrid DRAM/PCM memory.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment and emit a report")
    _add_run_args(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_pair = sub.add_parser("pair", help="run a variant against a baseline collector")
    _add_run_args(p_pair)
    p_pair.add_argument("--baseline", default="PCM-Only")
    p_pair.set_defaults(func=_cmd_pair)

    p_sweep = sub.add_parser("sweep", help="cross product of collectors, cache sizes, instance counts")
    _add_run_args(p_sweep)
    p_sweep.add_argument("--collectors", nargs="+", default=COLLECTOR_NAMES)
    p_sweep.add_argument("--cache-sizes", nargs="+", default=None, metavar="SIZE")
    p_sweep.add_argument("--instance-counts", nargs="+", type=int, default=None)
    p_sweep.add_argument("--out-dir", default=".")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_gen = sub.add_parser("gen-trace", help="write a synthetic trace to a file or stdout")
    p_gen.add_argument("--archetype", choices=sorted(ARCHETYPES), required=True)
    p_gen.add_argument("--seed", type=int, required=True)
    p_gen.add_argument("--ops", type=int, default=None)
    p_gen.add_argument("--out", default=None)
    p_gen.set_defaults(func=_cmd_gen_trace)

    p_life = sub.add_parser("lifetime", help="device lifetime in years for a PCM write rate")
    p_life.add_argument("rate", type=float, help="sustained PCM write rate in bytes/second")
    p_life.add_argument("--capacity", default="32GB")
    p_life.add_argument("--endurance", type=float, default=1.0e7)
    p_life.add_argument("--efficiency", type=float, default=0.5)
    p_life.set_defaults(func=_cmd_lifetime)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, TraceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SimulatorError as exc:
        print(f"run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
