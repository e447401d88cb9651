"""Experiment orchestration: scheduling, measurement windows, reports.

A run builds N heap instances over one shared cache/clock, interleaves
their op streams round-robin with a fixed quantum, excludes a warm-up
prefix from the counters, drains the cache, and reports per-instance and
aggregate traffic. Reports serialize to JSON or CSV and are byte-stable
for a given configuration and seed.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
from dataclasses import dataclass, field, replace

from .address_space import MemoryKind
from .collectors import build_instance
from .config import Collector, CollectorConfig
from .errors import ConfigError, SimulatorError
from .memory import (
    CacheModel,
    LifetimeModel,
    MemorySystem,
    SimClock,
    TrafficCounters,
    lifetime_years,
)
from .units import KIB, MIB
from .workloads import WorkloadSpec, default_spec, drive, generate, load_trace

ARCHETYPE_NURSERY = {
    "nursery-churn": 4 * MIB,
    "mature-mutation": 4 * MIB,
    "large-object-graph": 4 * MIB,
}
ARCHETYPE_BUDGET = {
    "nursery-churn": 64 * MIB,
    "mature-mutation": 12 * MIB,
    "large-object-graph": 16 * MIB,
}


def derive_seed(master: int, index: int) -> int:
    """Stable per-instance seed; instances must not share RNG streams."""
    return (master * 6364136223846793005 + (index + 1) * 1442695040888963407) % (1 << 63)


@dataclass
class ExperimentConfig:
    collector: str
    seed: int
    instances: int = 1
    workload: WorkloadSpec | None = None  # replicated per instance with derived seeds
    trace_path: str | None = None
    nursery_size: int = 4 * MIB
    observer_multiplier: float = 2.0
    heap_budget: int = 64 * MIB
    heap_size: int = 2048 * MIB
    chunk_size: int = 4 * MIB
    cache_capacity: int = 20 * MIB
    cache_assoc: int = 16
    cache_line: int = 64
    quantum: int = 10_000
    warmup_fraction: float = 0.10
    zeroing: bool = True
    gc_traffic_through_cache: bool = True
    include_collector_time: bool = True
    large_threshold: int = 8 * KIB
    loo_nursery_fraction: float = 1.0 / 8.0
    large_relocation_threshold: int = 4
    boot_size: int = 4 * MIB
    boot_object_size: int = 256
    strict_checks: bool = True
    op_cost_ns: float = 5.0
    byte_cost_ns: float = 0.25
    lifetime_capacity_bytes: int = 32_000_000_000
    lifetime_endurance: float = 1.0e7
    lifetime_efficiency: float = 0.5

    def __post_init__(self) -> None:
        Collector.from_name(self.collector)  # validate early
        if self.seed is None:
            raise ConfigError("a seed is required; runs must be reproducible")
        if self.instances < 1:
            raise ConfigError("need at least one instance")
        if (self.workload is None) == (self.trace_path is None):
            raise ConfigError("exactly one of workload or trace_path must be given")
        if self.quantum <= 0:
            raise ConfigError("quantum must be positive")
        if not 0.0 <= self.warmup_fraction < 1.0:
            raise ConfigError("warm-up fraction must be in [0, 1)")

    def collector_config(self) -> CollectorConfig:
        return CollectorConfig(
            variant=Collector.from_name(self.collector),
            nursery_size=self.nursery_size,
            observer_multiplier=self.observer_multiplier,
            heap_budget=self.heap_budget,
            large_threshold=self.large_threshold,
            loo_nursery_fraction=self.loo_nursery_fraction,
            large_relocation_threshold=self.large_relocation_threshold,
        )

    def lifetime_model(self) -> LifetimeModel:
        return LifetimeModel(
            capacity_bytes=self.lifetime_capacity_bytes,
            endurance_writes=self.lifetime_endurance,
            wear_efficiency=self.lifetime_efficiency,
        )

    def to_dict(self) -> dict:
        data = dataclasses.asdict(self)
        if self.workload is not None:
            data["workload"] = self.workload.to_dict()
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        if data.get("workload") is not None:
            data["workload"] = WorkloadSpec.from_dict(data["workload"])
        return cls(**data)


def config_for_archetype(
    archetype: str, collector: str, seed: int, op_count: int | None = None, **overrides
) -> ExperimentConfig:
    """An ExperimentConfig with the archetype's natural heap parameters."""
    spec = default_spec(archetype, op_count=op_count, seed=seed)
    base = dict(
        collector=collector,
        seed=seed,
        workload=spec,
        nursery_size=ARCHETYPE_NURSERY[archetype],
        heap_budget=ARCHETYPE_BUDGET[archetype],
    )
    base.update(overrides)
    return ExperimentConfig(**base)


@dataclass
class InstanceReport:
    instance: str  # index as text, or "all" for the aggregate row
    workload: str
    ops_executed: int
    pcm_write_bytes: int
    dram_write_bytes: int
    pcm_read_bytes: int
    dram_read_bytes: int
    pcm_write_rate_bps: float | None
    lifetime_years: float | None
    minor_collections: int
    observer_collections: int
    major_collections: int
    copied_bytes: int
    mark_writes: int
    mark_writes_pcm: int
    large_relocations: int
    pcm_write_bytes_by_space: dict[str, int] = field(default_factory=dict)
    dram_write_bytes_by_space: dict[str, int] = field(default_factory=dict)


CSV_COLUMNS = [
    "instance",
    "collector",
    "workload",
    "seed",
    "ops_executed",
    "dram_write_bytes",
    "pcm_write_bytes",
    "dram_read_bytes",
    "pcm_read_bytes",
    "pcm_write_rate_bps",
    "lifetime_years",
    "minor_collections",
    "observer_collections",
    "major_collections",
    "copied_bytes",
    "mark_writes",
    "mark_writes_pcm",
    "large_relocations",
    "reduction_vs_baseline",
]


@dataclass
class Report:
    config: dict
    collector: str
    seed: int
    sim_seconds: float
    rows: list[InstanceReport]
    aggregate: InstanceReport
    llc_fills: int
    llc_writebacks: int
    failed: bool = False
    error: dict | None = None
    baseline_collector: str | None = None
    reduction_vs_baseline: float | None = None

    def to_json(self) -> str:
        payload = {
            "config": self.config,
            "collector": self.collector,
            "seed": self.seed,
            "sim_seconds": self.sim_seconds,
            "instances": [dataclasses.asdict(r) for r in self.rows],
            "aggregate": dataclasses.asdict(self.aggregate),
            "llc": {"fills": self.llc_fills, "writebacks": self.llc_writebacks},
            "failed": self.failed,
            "error": self.error,
            "baseline_collector": self.baseline_collector,
            "reduction_vs_baseline": self.reduction_vs_baseline,
        }
        return json.dumps(payload, sort_keys=True, indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in [*self.rows, self.aggregate]:
            writer.writerow(
                [
                    row.instance,
                    self.collector,
                    row.workload,
                    self.seed,
                    row.ops_executed,
                    row.dram_write_bytes,
                    row.pcm_write_bytes,
                    row.dram_read_bytes,
                    row.pcm_read_bytes,
                    "" if row.pcm_write_rate_bps is None else repr(row.pcm_write_rate_bps),
                    "" if row.lifetime_years is None else repr(row.lifetime_years),
                    row.minor_collections,
                    row.observer_collections,
                    row.major_collections,
                    row.copied_bytes,
                    row.mark_writes,
                    row.mark_writes_pcm,
                    row.large_relocations,
                    "" if self.reduction_vs_baseline is None else repr(self.reduction_vs_baseline),
                ]
            )
        return buf.getvalue()


def build_system(config: ExperimentConfig) -> MemorySystem:
    split = config.heap_size // 2
    cache = CacheModel(config.cache_capacity, config.cache_assoc, config.cache_line, split)
    clock = SimClock(config.op_cost_ns, config.byte_cost_ns, config.include_collector_time)
    return MemorySystem(cache, TrafficCounters(), clock, config.gc_traffic_through_cache)


def _instance_streams(config: ExperimentConfig):
    """Per-instance (description, op iterator, total op count) triples."""
    out = []
    if config.trace_path is not None:
        ops = load_trace(config.trace_path)
        for _ in range(config.instances):
            out.append((config.trace_path, iter(ops), len(ops)))
    else:
        assert config.workload is not None
        for i in range(config.instances):
            spec = config.workload.with_seed(derive_seed(config.seed, i))
            out.append((spec.archetype, generate(spec), spec.op_count))
    return out


def run_experiment(config: ExperimentConfig) -> Report:
    system = build_system(config)
    collector_config = config.collector_config()
    heaps = [
        build_instance(
            collector_config,
            system,
            instance_id=i,
            heap_size=config.heap_size,
            chunk_size=config.chunk_size,
            boot_size=config.boot_size,
            boot_object_size=config.boot_object_size,
            zeroing=config.zeroing,
            strict_checks=config.strict_checks,
        )
        for i in range(config.instances)
    ]
    streams = _instance_streams(config)
    totals = [t for (_d, _s, t) in streams]
    warmup_at = [int(t * config.warmup_fraction) for t in totals]
    ops_done = [0] * config.instances
    alive = [True] * config.instances

    base_counters = system.counters.snapshot()
    base_ns = system.clock.now_ns
    warmed = all(ops_done[i] >= warmup_at[i] for i in range(config.instances))
    failure: dict | None = None

    while any(alive) and failure is None:
        for i in range(config.instances):
            if not alive[i]:
                continue
            try:
                executed, exhausted = drive(heaps[i], streams[i][1], config.quantum)
            except SimulatorError as exc:
                failure = {
                    "instance": i,
                    "op_index": heaps[i].op_index,
                    "message": f"{type(exc).__name__}: {exc}",
                }
                break
            ops_done[i] += executed
            if exhausted:
                alive[i] = False
        if not warmed and all(ops_done[i] >= warmup_at[i] for i in range(config.instances)):
            # measurement window opens once every instance is past warm-up
            warmed = True
            base_counters = system.counters.snapshot()
            base_ns = system.clock.now_ns

    system.drain()
    if config.strict_checks:
        system.counters.check_write_conservation()

    window = system.counters.diff(base_counters)
    elapsed = (system.clock.now_ns - base_ns) * 1e-9
    model = config.lifetime_model()

    def make_row(label: str, inst: int | None, desc: str, ops: int) -> InstanceReport:
        pcm_w = window.total_write_bytes(MemoryKind.PCM, inst)
        dram_w = window.total_write_bytes(MemoryKind.DRAM, inst)
        pcm_r = window.total_read_bytes(MemoryKind.PCM, inst)
        dram_r = window.total_read_bytes(MemoryKind.DRAM, inst)
        rate = pcm_w / elapsed if elapsed > 0 else None
        years = lifetime_years(rate, model) if rate is not None else None
        engines = [heaps[inst].gc] if inst is not None else [h.gc for h in heaps]
        counts = {"minor": 0, "observer": 0, "major": 0}
        copied = marks = marks_pcm = reloc = 0
        for eng in engines:
            for st in eng.collections:
                counts[st.kind] += 1
                copied += st.bytes_copied_total
                marks += st.mark_writes
                marks_pcm += st.mark_writes_pcm
                reloc += st.large_relocated
        return InstanceReport(
            instance=label,
            workload=desc,
            ops_executed=ops,
            pcm_write_bytes=pcm_w,
            dram_write_bytes=dram_w,
            pcm_read_bytes=pcm_r,
            dram_read_bytes=dram_r,
            pcm_write_rate_bps=rate,
            lifetime_years=years,
            minor_collections=counts["minor"],
            observer_collections=counts["observer"],
            major_collections=counts["major"],
            copied_bytes=copied,
            mark_writes=marks,
            mark_writes_pcm=marks_pcm,
            large_relocations=reloc,
            pcm_write_bytes_by_space=(window.by_space(inst, MemoryKind.PCM) if inst is not None else {}),
            dram_write_bytes_by_space=(window.by_space(inst, MemoryKind.DRAM) if inst is not None else {}),
        )

    rows = [
        make_row(str(i), i, streams[i][0], ops_done[i])
        for i in range(config.instances)
    ]
    aggregate = make_row("all", None, streams[0][0], sum(ops_done))
    return Report(
        config=config.to_dict(),
        collector=config.collector,
        seed=config.seed,
        sim_seconds=elapsed,
        rows=rows,
        aggregate=aggregate,
        llc_fills=window.fills,
        llc_writebacks=window.writebacks,
        failed=failure is not None,
        error=failure,
    )


@dataclass
class PairResult:
    baseline: Report
    variant: Report
    reduction: float | None  # 1 - variant/baseline PCM write bytes


def run_baseline_pair(config: ExperimentConfig, baseline: str = "PCM-Only") -> PairResult:
    if Collector.from_name(config.collector) is Collector.from_name(baseline):
        raise ConfigError("variant and baseline are the same collector")
    base_report = run_experiment(replace(config, collector=baseline))
    var_report = run_experiment(config)
    base_pcm = base_report.aggregate.pcm_write_bytes
    reduction = None
    if base_pcm > 0 and not (base_report.failed or var_report.failed):
        reduction = 1.0 - var_report.aggregate.pcm_write_bytes / base_pcm
    var_report.baseline_collector = baseline
    var_report.reduction_vs_baseline = reduction
    return PairResult(base_report, var_report, reduction)


def sweep(
    config: ExperimentConfig,
    collectors: list[str],
    cache_sizes: list[int],
    instance_counts: list[int],
) -> list[tuple[str, Report]]:
    """Cross product of the requested axes; one report per point."""
    out = []
    for name in collectors:
        for cap in cache_sizes:
            for n in instance_counts:
                point = replace(
                    config, collector=name, cache_capacity=cap, instances=n
                )
                label = f"{name}_cache{cap}_n{n}"
                out.append((label, run_experiment(point)))
    return out


def emit_report(report: Report, fmt: str, dest) -> None:
    """Write ``report`` as ``fmt`` ('json'|'csv') to a path or file object."""
    if fmt == "json":
        text = report.to_json() + "\n"
    elif fmt == "csv":
        text = report.to_csv()
    else:
        raise ConfigError(f"unknown report format {fmt!r}")
    if hasattr(dest, "write"):
        dest.write(text)
    else:
        with open(dest, "w", encoding="utf-8") as fh:
            fh.write(text)
