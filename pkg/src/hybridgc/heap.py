"""Per-instance heap: spaces, object records, mutator operations.

Each instance owns a full split address range. Fixed spaces (boot,
nursery, observer) claim specific chunks at startup; mature, large and
metadata spaces pull chunks from the free lists on demand. The write
barrier and all traffic emission live here; the collection algorithms
that consume this state live in :mod:`hybridgc.collectors`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from .address_space import HeapLayout, MemoryKind, init_layout
from .config import Collector, CollectorConfig
from .errors import ConfigError, HeapExhausted, OutOfChunks, TraceError
from .memory import MemorySystem
from .units import MIB

if TYPE_CHECKING:  # pragma: no cover
    from .collectors import GcEngine

HEADER_SIZE = 16
REF_SIZE = 8
META_SLOT_SIZE = 16
BOOT_OBJECT_REFS = 4

# Space identifiers. Which of these exist, and on which memory kind,
# depends on the collector variant.
BOOT = "boot"
NURSERY = "nursery"
OBSERVER = "observer"
MATURE_DRAM = "mature-dram"
MATURE_PCM = "mature-pcm"
LOS_DRAM = "los-dram"
LOS_PCM = "los-pcm"
META_DRAM = "meta-dram"
META_PCM = "meta-pcm"


def align8(n: int) -> int:
    return (n + 7) & ~7


@dataclass(frozen=True)
class SpaceDescriptor:
    name: str
    memory: MemoryKind
    policy: str  # "bump" | "free-list"
    boot_reserved: bool  # fixed contiguous range vs on-demand chunks


def make_space_map(config: CollectorConfig) -> dict[str, SpaceDescriptor]:
    """Spaces for a collector variant, each pinned to one memory kind."""

    def bump(name: str, kind: MemoryKind) -> SpaceDescriptor:
        return SpaceDescriptor(name, kind, "bump", True)

    def demand(name: str, kind: MemoryKind) -> SpaceDescriptor:
        return SpaceDescriptor(name, kind, "free-list", False)

    variant = config.variant
    spaces: list[SpaceDescriptor] = []
    if variant is Collector.PCM_ONLY:
        spaces = [
            bump(BOOT, MemoryKind.PCM),
            bump(NURSERY, MemoryKind.PCM),
            demand(MATURE_PCM, MemoryKind.PCM),
            demand(LOS_PCM, MemoryKind.PCM),
            demand(META_PCM, MemoryKind.PCM),
        ]
    elif variant.is_write_sampling:
        spaces = [
            bump(BOOT, MemoryKind.DRAM),
            bump(NURSERY, MemoryKind.DRAM),
            bump(OBSERVER, MemoryKind.DRAM),
            demand(MATURE_DRAM, MemoryKind.DRAM),
            demand(MATURE_PCM, MemoryKind.PCM),
            demand(LOS_DRAM, MemoryKind.DRAM),
            demand(LOS_PCM, MemoryKind.PCM),
            demand(META_PCM, MemoryKind.PCM),
        ]
        if config.mdo:
            spaces.append(demand(META_DRAM, MemoryKind.DRAM))
    else:
        spaces = [
            bump(BOOT, MemoryKind.DRAM),
            bump(NURSERY, MemoryKind.DRAM),
            demand(MATURE_PCM, MemoryKind.PCM),
            demand(LOS_PCM, MemoryKind.PCM),
            demand(META_PCM, MemoryKind.PCM),
        ]
        if config.loo:
            # relocation target for heavily written large objects
            spaces.append(demand(LOS_DRAM, MemoryKind.DRAM))
    return {d.name: d for d in spaces}


class BumpSpace:
    """Contiguous space with a monotone cursor; reset empties it wholesale."""

    def __init__(self, descriptor: SpaceDescriptor, lo: int, hi: int) -> None:
        self.descriptor = descriptor
        self.name = descriptor.name
        self.lo = lo
        self.hi = hi
        self.cursor = lo

    @property
    def capacity(self) -> int:
        return self.hi - self.lo

    @property
    def free(self) -> int:
        return self.hi - self.cursor

    @property
    def used(self) -> int:
        return self.cursor - self.lo

    def alloc(self, n: int) -> int | None:
        if self.cursor + n > self.hi:
            return None
        addr = self.cursor
        self.cursor += n
        return addr

    def reset(self) -> None:
        self.cursor = self.lo

    def contains(self, addr: int) -> bool:
        return self.lo <= addr < self.hi


class FreeListSpace:
    """Mark-sweep space over on-demand chunks with first-fit extents."""

    def __init__(self, descriptor: SpaceDescriptor, layout: HeapLayout) -> None:
        self.descriptor = descriptor
        self.name = descriptor.name
        self.memory = descriptor.memory
        self.layout = layout
        self.chunks: list = []
        self.extents: list[list[int]] = []  # [addr, size], sorted by addr
        self.allocated_bytes = 0

    def alloc(self, n: int) -> int:
        if n > self.layout.chunk_size:
            raise HeapExhausted(
                f"object of {n} bytes exceeds the {self.layout.chunk_size}-byte chunk size"
            )
        addr = self._first_fit(n)
        if addr is None:
            chunk = self.layout.free_list_for(self.memory).reserve(self.name)
            self.chunks.append(chunk)
            self._insert_extent(chunk.base, chunk.size)
            addr = self._first_fit(n)
            assert addr is not None
        self.allocated_bytes += n
        return addr

    def _first_fit(self, n: int) -> int | None:
        for ext in self.extents:
            if ext[1] >= n:
                addr = ext[0]
                ext[0] += n
                ext[1] -= n
                if ext[1] == 0:
                    self.extents.remove(ext)
                return addr
        return None

    def _insert_extent(self, addr: int, size: int) -> None:
        lo, hi = 0, len(self.extents)
        while lo < hi:
            mid = (lo + hi) // 2
            if self.extents[mid][0] < addr:
                lo = mid + 1
            else:
                hi = mid
        self.extents.insert(lo, [addr, size])

    def sweep(self, live_intervals: list[tuple[int, int]]) -> None:
        """Rebuild free extents around ``live_intervals`` (sorted by addr).

        Chunks with no live data are handed back for recycling.
        """
        kept = []
        extents: list[list[int]] = []
        live_bytes = 0
        idx = 0
        n_live = len(live_intervals)
        for chunk in sorted(self.chunks, key=lambda c: c.base):
            lo, hi = chunk.base, chunk.base + chunk.size
            cursor = lo
            any_live = False
            while idx < n_live and live_intervals[idx][0] < hi:
                a, sz = live_intervals[idx]
                assert a >= lo and a + sz <= hi, "live object outside its chunk"
                any_live = True
                live_bytes += sz
                if a > cursor:
                    extents.append([cursor, a - cursor])
                cursor = a + sz
                idx += 1
            if not any_live:
                self.layout.release_chunk(chunk)
                continue
            if cursor < hi:
                extents.append([cursor, hi - cursor])
            kept.append(chunk)
        assert idx == n_live, "live object not inside any owned chunk"
        self.chunks = kept
        self.extents = extents
        self.allocated_bytes = live_bytes


@dataclass(slots=True)
class ObjectRecord:
    id: int
    addr: int
    size: int  # extent size: requested, padded to header+slots and 8B-aligned
    space: str
    refs: list[int]  # referent ids; 0 is null
    write_count: int = 0
    large: bool = False
    meta_addr: int | None = None  # DRAM shadow slot for the mark, when used


class HeapInstance:
    """One program's heap; all traffic goes through the shared memory system."""

    def __init__(
        self,
        instance_id: int,
        config: CollectorConfig,
        system: MemorySystem,
        *,
        heap_size: int = 2048 * MIB,
        chunk_size: int = 4 * MIB,
        boot_size: int = 4 * MIB,
        boot_object_size: int = 256,
        zeroing: bool = True,
        strict_checks: bool = True,
    ) -> None:
        self.instance_id = instance_id
        self.config = config
        self.system = system
        self.zeroing = zeroing
        self.strict_checks = strict_checks
        self.layout = init_layout(heap_size, chunk_size)
        self.space_map = make_space_map(config)
        self.gc: "GcEngine | None" = None  # attached by the engine

        self.objects: dict[int, ObjectRecord] = {}
        self.roots: set[int] = set()
        self.remset: set[tuple[int, int]] = set()
        self.ever_ids: set[int] = set()
        self.op_index = 0  # maintained by the trace driver, for diagnostics

        # raw bytes emitted toward the memory system, by source
        self.emitted = {
            "zero": 0,
            "mutator_write": 0,
            "mutator_read": 0,
            "barrier": 0,
            "copy_read": 0,
            "copy_write": 0,
            "mark": 0,
        }

        self._place_fixed_spaces(boot_size)
        self.free_list_spaces: dict[str, FreeListSpace] = {}
        for desc in self.space_map.values():
            if desc.policy == "free-list":
                self.free_list_spaces[desc.name] = FreeListSpace(desc, self.layout)
        self.spaces: dict[str, BumpSpace | FreeListSpace] = {**self._bump_spaces, **self.free_list_spaces}
        self._seed_boot_objects(boot_object_size)

    # -- construction helpers --

    def _place_fixed_spaces(self, boot_size: int) -> None:
        layout = self.layout
        cfg = self.config

        def half_bounds(kind: MemoryKind) -> tuple[int, int]:
            if kind is MemoryKind.PCM:
                return layout.heap_base, layout.split
            return layout.split, layout.heap_top

        self._bump_spaces: dict[str, BumpSpace] = {}
        young_kind = self.space_map[NURSERY].memory
        half_lo, half_hi = half_bounds(young_kind)
        nursery_hi = half_hi
        nursery_lo = nursery_hi - cfg.effective_nursery_size
        ranges: list[tuple[str, int, int]] = [(NURSERY, nursery_lo, nursery_hi)]
        young_lo = nursery_lo
        if OBSERVER in self.space_map:
            observer_hi = nursery_lo
            observer_lo = observer_hi - cfg.observer_size
            ranges.append((OBSERVER, observer_lo, observer_hi))
            young_lo = observer_lo
        boot_kind = self.space_map[BOOT].memory
        boot_lo = half_bounds(boot_kind)[0]
        boot_hi = boot_lo + boot_size
        ranges.append((BOOT, boot_lo, boot_hi))

        if young_lo < half_lo:
            raise ConfigError("nursery and observer do not fit in their memory half")
        if boot_kind is young_kind and boot_hi > young_lo:
            raise ConfigError("boot space overlaps the young region")

        reserved: set[int] = set()
        for name, lo, hi in ranges:
            desc = self.space_map[name]
            first = (lo - layout.heap_base) // layout.chunk_size
            last = (hi - 1 - layout.heap_base) // layout.chunk_size
            for index in range(first, last + 1):
                if index in reserved:
                    continue  # adjacent fixed spaces may share a boundary chunk
                layout.free_list_for(layout.chunks[index].kind).reserve_index(index, name)
                reserved.add(index)
            self._bump_spaces[name] = BumpSpace(desc, lo, hi)

        self.young_lo = young_lo
        self.young_hi = nursery_hi
        self.nursery = self._bump_spaces[NURSERY]
        self.observer = self._bump_spaces.get(OBSERVER)
        self.boot_space = self._bump_spaces[BOOT]

    def _seed_boot_objects(self, boot_object_size: int) -> None:
        """Pre-populate the immortal space; ids are negative and fixed.

        The boot image exists before the trace starts, so seeding emits
        no traffic. Traces address boot object k as id -(k+1).
        """
        extent = align8(max(boot_object_size, HEADER_SIZE + BOOT_OBJECT_REFS * REF_SIZE))
        count = self.boot_space.capacity // extent
        self.boot_ids: list[int] = []
        for k in range(count):
            addr = self.boot_space.alloc(extent)
            assert addr is not None
            oid = -(k + 1)
            self.objects[oid] = ObjectRecord(
                id=oid, addr=addr, size=extent, space=BOOT, refs=[0] * BOOT_OBJECT_REFS
            )
            self.boot_ids.append(oid)

    # -- address helpers --

    def is_young_addr(self, addr: int) -> bool:
        return self.young_lo <= addr < self.young_hi

    def emit(self, addr: int, length: int, write: bool, space: str, *, collector: bool, tally: str) -> None:
        self.emitted[tally] += length
        self.system.access(self.instance_id, addr, length, write, space, collector=collector)

    # -- mutator operations (one per trace op kind) --

    def alloc_object(self, oid: int, size: int, n_refs: int, large_hint: bool = False) -> ObjectRecord:
        if oid <= 0:
            raise TraceError(f"allocation id {oid} must be positive")
        if oid in self.ever_ids:
            raise TraceError(f"id {oid} was already allocated once")
        if size <= 0 or n_refs < 0:
            raise TraceError(f"bad allocation geometry (size={size}, refs={n_refs})")
        extent = align8(max(size, HEADER_SIZE + n_refs * REF_SIZE))
        self.system.clock.advance(1, extent)
        large = large_hint or size >= self.config.large_threshold

        if large:
            addr, space = self._alloc_large(extent)
        else:
            addr, space = self._alloc_small(extent)

        rec = ObjectRecord(id=oid, addr=addr, size=extent, space=space, refs=[0] * n_refs, large=large)
        self.objects[oid] = rec
        self.ever_ids.add(oid)
        if self.zeroing:
            self.emit(addr, extent, True, space, collector=False, tally="zero")
        return rec

    def _alloc_small(self, extent: int) -> tuple[int, str]:
        addr = self.nursery.alloc(extent)
        if addr is None:
            assert self.gc is not None
            self.gc.on_nursery_full()
            addr = self.nursery.alloc(extent)
            if addr is None:
                raise HeapExhausted(f"{extent}-byte object cannot fit an empty nursery")
        return addr, NURSERY

    def _alloc_large(self, extent: int) -> tuple[int, str]:
        assert self.gc is not None
        if self.config.loo and self.gc.admit_large(extent):
            addr = self.nursery.alloc(extent)
            assert addr is not None  # admission checked the free space
            return addr, NURSERY
        try:
            return self.free_list_spaces[LOS_PCM].alloc(extent), LOS_PCM
        except OutOfChunks as exc:
            raise HeapExhausted(str(exc)) from exc

    def write_data(self, oid: int, offset: int, length: int) -> None:
        rec = self._lookup(oid)
        self._check_bounds(rec, offset, length)
        self.system.clock.advance(1, length)
        rec.write_count += 1
        self.emit(rec.addr + offset, length, True, rec.space, collector=False, tally="mutator_write")

    def read_data(self, oid: int, offset: int, length: int) -> None:
        rec = self._lookup(oid)
        self._check_bounds(rec, offset, length)
        self.system.clock.advance(1, length)
        self.emit(rec.addr + offset, length, False, rec.space, collector=False, tally="mutator_read")

    def write_ref(self, parent_id: int, slot: int, child_id: int) -> None:
        parent = self._lookup(parent_id)
        if not 0 <= slot < len(parent.refs):
            raise TraceError(f"object {parent_id} has {len(parent.refs)} ref slots, not {slot + 1}")
        child = self._lookup(child_id) if child_id else None
        parent.refs[slot] = child_id if child is not None else 0
        parent.write_count += 1
        self.system.clock.advance(1, 64)
        line = self.system.cache.line_size
        slot_addr = parent.addr + HEADER_SIZE + slot * REF_SIZE
        line_base = (slot_addr // line) * line
        self.emit(line_base, line, True, parent.space, collector=False, tally="barrier")
        if child is not None and not self.is_young_addr(parent.addr) and self.is_young_addr(child.addr):
            self.remset.add((parent_id, slot))

    def set_root(self, oid: int, rooted: bool) -> None:
        self._lookup(oid)  # rooting a reclaimed id is a trace error
        self.system.clock.advance(1, 0)
        if rooted:
            self.roots.add(oid)
        else:
            self.roots.discard(oid)

    # -- plumbing shared with the collector engine --

    def _lookup(self, oid: int) -> ObjectRecord:
        rec = self.objects.get(oid)
        if rec is None:
            raise TraceError(f"id {oid} is not a live allocation")
        return rec

    @staticmethod
    def _check_bounds(rec: ObjectRecord, offset: int, length: int) -> None:
        if offset < 0 or length < 0 or offset + length > rec.size:
            raise TraceError(
                f"access [{offset}, {offset + length}) outside object {rec.id} of {rec.size} bytes"
            )

    def mature_occupancy(self) -> int:
        # mark metadata is collector bookkeeping, not payload; the heap
        # budget governs payload so mdo on/off cannot shift major timing
        return sum(
            s.allocated_bytes
            for name, s in self.free_list_spaces.items()
            if name not in (META_DRAM, META_PCM)
        )

    def check_placement(self) -> None:
        """Every live object must sit on its space's memory kind."""
        for rec in self.objects.values():
            want = self.space_map[rec.space].memory
            got = self.layout.region_of(rec.addr)
            assert got is want, f"object {rec.id} in {rec.space} landed on {got.value}"
        self.layout.check_invariants()
