"""Trace-driven simulator for generational GC on hybrid DRAM/PCM memory."""

from .address_space import HeapLayout, MemoryKind, init_layout, region_of
from .collectors import CollectionStats, GcEngine, build_instance
from .config import Collector, CollectorConfig
from .errors import (
    AddressRangeError,
    ConfigError,
    DoubleFree,
    GcLogicError,
    HeapExhausted,
    OutOfChunks,
    RateUndefined,
    SimulatorError,
    TraceError,
)
from .harness import (
    ExperimentConfig,
    PairResult,
    Report,
    config_for_archetype,
    run_baseline_pair,
    run_experiment,
    sweep,
)
from .heap import HeapInstance, ObjectRecord, align8, make_space_map
from .memory import (
    UNBOUNDED_YEARS,
    CacheModel,
    LifetimeModel,
    MemorySystem,
    SimClock,
    TrafficCounters,
    lifetime_years,
    pcm_write_rate,
)
from .workloads import (
    ARCHETYPES,
    WorkloadSpec,
    default_spec,
    drive,
    generate,
    load_trace,
    parse_trace,
    serialize_trace,
)

__version__ = "0.1.0"

__all__ = [
    "ARCHETYPES",
    "AddressRangeError",
    "CacheModel",
    "CollectionStats",
    "Collector",
    "CollectorConfig",
    "ConfigError",
    "DoubleFree",
    "ExperimentConfig",
    "GcEngine",
    "GcLogicError",
    "HeapExhausted",
    "HeapInstance",
    "HeapLayout",
    "LifetimeModel",
    "MemoryKind",
    "MemorySystem",
    "ObjectRecord",
    "OutOfChunks",
    "PairResult",
    "RateUndefined",
    "Report",
    "SimClock",
    "SimulatorError",
    "TraceError",
    "TrafficCounters",
    "UNBOUNDED_YEARS",
    "WorkloadSpec",
    "align8",
    "build_instance",
    "config_for_archetype",
    "default_spec",
    "drive",
    "generate",
    "init_layout",
    "lifetime_years",
    "load_trace",
    "make_space_map",
    "parse_trace",
    "pcm_write_rate",
    "region_of",
    "run_baseline_pair",
    "run_experiment",
    "serialize_trace",
    "sweep",
]
