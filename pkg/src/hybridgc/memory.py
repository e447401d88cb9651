"""Shared last-level cache, traffic accounting, simulated time, lifetime.

Device-level write counters only grow when a line actually reaches
memory: on a dirty eviction or a drain, or immediately when the cache is
disabled. Reads reach memory as line fills. Every counter is keyed by
(instance, memory kind, space) so multiprogram runs stay attributable.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field

from .address_space import MemoryKind
from .errors import ConfigError, RateUndefined

LINE_SIZE_DEFAULT = 64
SECONDS_PER_YEAR = 365.25 * 86400  # 31,557,600

# Finite stand-in for "no wear-out in any meaningful horizon".
UNBOUNDED_YEARS = 1.0e9


class TrafficCounters:
    """Byte counters for traffic that reached memory, plus filter internals.

    ``write_bytes`` and ``read_bytes`` are keyed by
    ``(instance, MemoryKind, space)``. The demand/absorbed/writeback
    triple is keyed by ``(instance, MemoryKind)`` and feeds the filter
    conservation check: after a drain, demand equals absorbed plus
    written back, per key.
    """

    def __init__(self) -> None:
        self.write_bytes: dict[tuple[int, MemoryKind, str], int] = {}
        self.read_bytes: dict[tuple[int, MemoryKind, str], int] = {}
        self.demand_write_bytes: dict[tuple[int, MemoryKind], int] = {}
        self.absorbed_write_bytes: dict[tuple[int, MemoryKind], int] = {}
        self.writeback_bytes: dict[tuple[int, MemoryKind], int] = {}
        self.fills = 0
        self.writebacks = 0

    # -- accumulation helpers (hot path uses the dicts directly) --

    def add_write(self, inst: int, kind: MemoryKind, space: str, n: int) -> None:
        key = (inst, kind, space)
        self.write_bytes[key] = self.write_bytes.get(key, 0) + n

    def add_read(self, inst: int, kind: MemoryKind, space: str, n: int) -> None:
        key = (inst, kind, space)
        self.read_bytes[key] = self.read_bytes.get(key, 0) + n

    # -- queries --

    def total_write_bytes(self, kind: MemoryKind | None = None, inst: int | None = None) -> int:
        return sum(
            n
            for (i, k, _s), n in self.write_bytes.items()
            if (kind is None or k is kind) and (inst is None or i == inst)
        )

    def total_read_bytes(self, kind: MemoryKind | None = None, inst: int | None = None) -> int:
        return sum(
            n
            for (i, k, _s), n in self.read_bytes.items()
            if (kind is None or k is kind) and (inst is None or i == inst)
        )

    def by_space(self, inst: int, kind: MemoryKind) -> dict[str, int]:
        return {s: n for (i, k, s), n in sorted(self.write_bytes.items(), key=lambda kv: kv[0][2]) if i == inst and k is kind}

    def snapshot(self) -> "TrafficCounters":
        out = TrafficCounters()
        out.write_bytes = dict(self.write_bytes)
        out.read_bytes = dict(self.read_bytes)
        out.demand_write_bytes = dict(self.demand_write_bytes)
        out.absorbed_write_bytes = dict(self.absorbed_write_bytes)
        out.writeback_bytes = dict(self.writeback_bytes)
        out.fills = self.fills
        out.writebacks = self.writebacks
        return out

    def diff(self, base: "TrafficCounters") -> "TrafficCounters":
        """Counters accumulated since ``base`` was snapshotted."""
        out = TrafficCounters()
        for name in ("write_bytes", "read_bytes", "demand_write_bytes", "absorbed_write_bytes", "writeback_bytes"):
            cur: dict = getattr(self, name)
            old: dict = getattr(base, name)
            target: dict = getattr(out, name)
            for key, n in cur.items():
                d = n - old.get(key, 0)
                if d:
                    target[key] = d
        out.fills = self.fills - base.fills
        out.writebacks = self.writebacks - base.writebacks
        return out

    def check_write_conservation(self) -> None:
        """Valid only when no dirty line is outstanding (post-drain)."""
        keys = set(self.demand_write_bytes) | set(self.absorbed_write_bytes) | set(self.writeback_bytes)
        for key in keys:
            demand = self.demand_write_bytes.get(key, 0)
            absorbed = self.absorbed_write_bytes.get(key, 0)
            written = self.writeback_bytes.get(key, 0)
            assert demand == absorbed + written, (
                f"write bytes not conserved for {key}: {demand} demanded, "
                f"{absorbed} absorbed, {written} written back"
            )


class CacheModel:
    """Set-associative write-back write-allocate LRU cache.

    Lines are tagged with the owning instance, so identical virtual
    addresses from different instances occupy distinct lines while still
    competing for the same sets. ``capacity`` 0 degenerates to a
    pass-through that forwards every access byte-for-byte.
    """

    def __init__(
        self,
        capacity: int,
        assoc: int,
        line_size: int,
        split: int,
        *,
        record_events: bool = False,
    ) -> None:
        if capacity < 0 or line_size <= 0 or assoc <= 0:
            raise ConfigError("cache geometry must be non-negative")
        if capacity and capacity % (assoc * line_size) != 0:
            raise ConfigError(
                f"capacity {capacity} is not a whole number of {assoc}-way sets of {line_size}B lines"
            )
        self.capacity = capacity
        self.assoc = assoc
        self.line_size = line_size
        self.split_line = split // line_size
        self.n_sets = capacity // (assoc * line_size) if capacity else 0
        # Each set maps (instance, line index) -> [dirty, space]; LRU by order.
        self.sets: list[OrderedDict] = [OrderedDict() for _ in range(self.n_sets)]
        self.record_events = record_events
        self.events: list[tuple[str, int, int]] = []

    def access(self, counters: TrafficCounters, inst: int, addr: int, length: int, write: bool, space: str) -> None:
        if length <= 0:
            return
        if self.capacity == 0:
            self._passthrough(counters, inst, addr, length, write, space)
            return
        line_size = self.line_size
        first = addr // line_size
        last = (addr + length - 1) // line_size
        split_line = self.split_line
        for ln in range(first, last + 1):
            kind = MemoryKind.PCM if ln < split_line else MemoryKind.DRAM
            cset = self.sets[ln % self.n_sets]
            key = (inst, ln)
            entry = cset.get(key)
            if write:
                dkey = (inst, kind)
                counters.demand_write_bytes[dkey] = counters.demand_write_bytes.get(dkey, 0) + line_size
            if entry is not None:
                cset.move_to_end(key)
                if write:
                    if entry[0]:
                        akey = (inst, kind)
                        counters.absorbed_write_bytes[akey] = counters.absorbed_write_bytes.get(akey, 0) + line_size
                    else:
                        entry[0] = True
                    entry[1] = space
                continue
            # miss: allocate on both reads and writes
            counters.fills += 1
            counters.add_read(inst, kind, space, line_size)
            if self.record_events:
                self.events.append(("fill", inst, ln))
            if len(cset) >= self.assoc:
                (vinst, vln), (vdirty, vspace) = cset.popitem(last=False)
                if vdirty:
                    self._writeback(counters, vinst, vln, vspace)
            cset[key] = [write, space]

    def _writeback(self, counters: TrafficCounters, inst: int, ln: int, space: str) -> None:
        kind = MemoryKind.PCM if ln < self.split_line else MemoryKind.DRAM
        line_size = self.line_size
        counters.writebacks += 1
        wkey = (inst, kind)
        counters.writeback_bytes[wkey] = counters.writeback_bytes.get(wkey, 0) + line_size
        counters.add_write(inst, kind, space, line_size)
        if self.record_events:
            self.events.append(("wb", inst, ln))

    def _passthrough(self, counters: TrafficCounters, inst: int, addr: int, length: int, write: bool, space: str) -> None:
        kind = MemoryKind.PCM if addr // self.line_size < self.split_line else MemoryKind.DRAM
        if write:
            key = (inst, kind)
            counters.demand_write_bytes[key] = counters.demand_write_bytes.get(key, 0) + length
            counters.writeback_bytes[key] = counters.writeback_bytes.get(key, 0) + length
            counters.add_write(inst, kind, space, length)
        else:
            counters.add_read(inst, kind, space, length)

    def drain(self, counters: TrafficCounters) -> int:
        """Flush every dirty line; returns the number written back.

        Lines stay resident but clean, so draining twice is a no-op the
        second time.
        """
        flushed = 0
        for cset in self.sets:
            for (inst, ln), entry in cset.items():
                if entry[0]:
                    entry[0] = False
                    self._writeback(counters, inst, ln, entry[1])
                    flushed += 1
        return flushed

    def resident_lines(self) -> int:
        return sum(len(cset) for cset in self.sets)


class SimClock:
    """Simulated nanosecond clock with a linear op + byte cost model."""

    def __init__(
        self,
        op_cost_ns: float = 5.0,
        byte_cost_ns: float = 0.25,
        include_collector_time: bool = True,
    ) -> None:
        self.op_cost_ns = op_cost_ns
        self.byte_cost_ns = byte_cost_ns
        self.include_collector_time = include_collector_time
        self.now_ns = 0.0

    def advance(self, ops: int, nbytes: int, *, collector: bool = False) -> None:
        if collector and not self.include_collector_time:
            return
        self.now_ns += ops * self.op_cost_ns + nbytes * self.byte_cost_ns

    @property
    def elapsed_seconds(self) -> float:
        return self.now_ns * 1e-9


@dataclass
class MemorySystem:
    """One shared cache, counter set and clock, as seen by every instance."""

    cache: CacheModel
    counters: TrafficCounters
    clock: SimClock
    gc_traffic_through_cache: bool = True

    def access(self, inst: int, addr: int, length: int, write: bool, space: str, *, collector: bool = False) -> None:
        if collector and not self.gc_traffic_through_cache:
            self.cache._passthrough(self.counters, inst, addr, length, write, space)
            return
        self.cache.access(self.counters, inst, addr, length, write, space)

    def drain(self) -> int:
        return self.cache.drain(self.counters)


@dataclass(frozen=True)
class LifetimeModel:
    """Endurance model of the PCM device (not of the simulated heap)."""

    capacity_bytes: int = 32_000_000_000  # decimal GB, per device spec sheets
    endurance_writes: float = 1.0e7
    wear_efficiency: float = 0.5  # achieved fraction of ideal wear-leveling

    def __post_init__(self) -> None:
        if self.capacity_bytes <= 0 or self.endurance_writes <= 0:
            raise ConfigError("lifetime model needs positive capacity and endurance")
        if not 0.0 < self.wear_efficiency <= 1.0:
            raise ConfigError("wear efficiency must be in (0, 1]")


def lifetime_years(write_rate_bytes_per_s: float, model: LifetimeModel = LifetimeModel()) -> float:
    """Device lifetime until endurance exhaustion at a sustained write rate.

    A zero rate means the device never wears out; that is reported as the
    ``UNBOUNDED_YEARS`` cap so reports stay finite.
    """
    if write_rate_bytes_per_s < 0:
        raise ConfigError("write rate must be non-negative")
    if write_rate_bytes_per_s == 0:
        return UNBOUNDED_YEARS
    total = model.capacity_bytes * model.endurance_writes * model.wear_efficiency
    years = total / (write_rate_bytes_per_s * SECONDS_PER_YEAR)
    return min(years, UNBOUNDED_YEARS)


def pcm_write_rate(counters: TrafficCounters, clock: SimClock) -> float:
    """Bytes per simulated second written to PCM, over the clock's window."""
    if clock.now_ns <= 0:
        raise RateUndefined("no simulated time has elapsed")
    return counters.total_write_bytes(MemoryKind.PCM) / clock.elapsed_seconds
