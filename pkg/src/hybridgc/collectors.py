"""Collection algorithms and survivor-placement policy.

The engine owns the generational cycle: evacuate the nursery when it
fills, spill the observation space into mature DRAM or PCM according to
observed write counts, and run a full mark-sweep when mature occupancy
crosses the budget. Policy decisions (where a survivor goes, whether a
large object may use the nursery) are small pure functions so tests can
pin them directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

from .address_space import MemoryKind
from .config import Collector, CollectorConfig
from .errors import GcLogicError, HeapExhausted, OutOfChunks
from .heap import (
    LOS_DRAM,
    LOS_PCM,
    META_SLOT_SIZE,
    NURSERY,
    OBSERVER,
    HeapInstance,
    ObjectRecord,
)


class Phase(Enum):
    MINOR = "minor"
    OBSERVER = "observer"


def route_survivor(config: CollectorConfig, obj: ObjectRecord, phase: Phase) -> str:
    """Destination space for a (non-large) survivor of the given phase."""
    if phase is Phase.MINOR:
        if config.variant.is_write_sampling:
            return OBSERVER
        return "mature-pcm"
    if phase is Phase.OBSERVER:
        if not config.variant.is_write_sampling:
            raise GcLogicError(f"{config.variant.value} has no observation space")
        # Objects that stayed write-quiet while observed are safe in PCM;
        # anything written goes to DRAM.
        return "mature-pcm" if obj.write_count == 0 else "mature-dram"
    raise GcLogicError(f"unknown phase {phase!r}")


def loo_admit(config: CollectorConfig, size: int, nursery_free: int) -> bool:
    """May a large object of ``size`` bytes be allocated in the nursery?

    Only when the optimization is on, the object is small relative to the
    nursery, and there is room right now; otherwise it goes to the LOS
    without forcing a collection.
    """
    if not config.loo:
        return False
    cap = config.loo_nursery_fraction * config.effective_nursery_size
    return size <= cap and size <= nursery_free


@dataclass
class CollectionStats:
    kind: str  # "minor" | "observer" | "major"
    objects_scanned: int = 0
    copied_objects: int = 0
    copied_bytes: dict[str, int] = field(default_factory=dict)
    evacuated_bytes: int = 0  # bytes copied out of the collected space
    space_used_before: int = 0  # fill of the collected space at entry
    mark_writes: int = 0
    mark_writes_pcm: int = 0
    large_relocated: int = 0
    reclaimed_objects: int = 0
    live_bytes_after: int = 0  # mature occupancy after a major

    @property
    def bytes_copied_total(self) -> int:
        return sum(self.copied_bytes.values())


class GcEngine:
    """Drives all collections for one heap instance."""

    def __init__(self, heap: HeapInstance) -> None:
        self.heap = heap
        self.config = heap.config
        self.collections: list[CollectionStats] = []
        # Called with (kind, frozenset of live ids) after each closure is
        # computed and before any state changes; used by reachability oracles.
        self.inspect_hook: Callable[[str, frozenset], None] | None = None
        heap.gc = self

    # -- hooks used by the heap's allocator --

    def admit_large(self, size: int) -> bool:
        return loo_admit(self.config, size, self.heap.nursery.free)

    def on_nursery_full(self) -> None:
        for attempt in (0, 1):
            live = self._young_closure()
            needs = self._cycle_chunk_needs(live)
            if self._chunks_available(needs):
                break
            if attempt == 0:
                self.collect_major()  # cascade once, then give up
            else:
                raise HeapExhausted("no chunks left for minor-collection survivors")
        self._run_young_cycle(live)
        if self.heap.mature_occupancy() >= self.config.heap_budget:
            self.collect_major()

    # -- closures --

    def _young_closure(self) -> set[int]:
        """Ids of young objects reachable from roots and remembered slots."""
        heap = self.heap
        objects = heap.objects
        is_young = heap.is_young_addr
        seeds = []
        for oid in sorted(heap.roots):
            rec = objects.get(oid)
            if rec is not None and is_young(rec.addr):
                seeds.append(oid)
        for pid, slot in sorted(heap.remset):
            parent = objects.get(pid)
            if parent is None or slot >= len(parent.refs):
                continue
            cid = parent.refs[slot]
            if not cid:
                continue
            child = objects.get(cid)
            if child is not None and is_young(child.addr):
                seeds.append(cid)
        live: set[int] = set()
        stack = seeds
        while stack:
            oid = stack.pop()
            if oid in live:
                continue
            live.add(oid)
            for cid in objects[oid].refs:
                if cid and cid not in live:
                    child = objects.get(cid)
                    if child is not None and is_young(child.addr):
                        stack.append(cid)
        return live

    def _full_closure(self) -> set[int]:
        """Everything reachable from roots; the boot image counts as roots."""
        heap = self.heap
        objects = heap.objects
        live: set[int] = set()
        stack = sorted(heap.roots) + list(heap.boot_ids)
        while stack:
            oid = stack.pop()
            if oid in live or oid not in objects:
                continue
            live.add(oid)
            for cid in objects[oid].refs:
                if cid and cid not in live:
                    stack.append(cid)
        return live

    # -- chunk pre-flight, so copies never fail halfway --

    def _cycle_chunk_needs(self, live: set[int]) -> dict[str, int]:
        heap = self.heap
        needs: dict[str, int] = {}
        to_observer = 0
        observer_live: list[ObjectRecord] = []
        for oid in live:
            rec = heap.objects[oid]
            if rec.space == NURSERY:
                dest = LOS_PCM if rec.large else route_survivor(self.config, rec, Phase.MINOR)
                if dest == OBSERVER:
                    to_observer += rec.size
                else:
                    needs[dest] = needs.get(dest, 0) + rec.size
            elif rec.space == OBSERVER:
                observer_live.append(rec)
        if heap.observer is not None and heap.observer.free < to_observer:
            for rec in observer_live:
                dest = route_survivor(self.config, rec, Phase.OBSERVER)
                needs[dest] = needs.get(dest, 0) + rec.size
        return needs

    def _chunks_available(self, needs: dict[str, int]) -> bool:
        heap = self.heap
        layout = heap.layout
        fresh = {MemoryKind.DRAM: 0, MemoryKind.PCM: 0}
        for name, nbytes in needs.items():
            space = heap.free_list_spaces[name]
            # bytes already free in this space's extents serve first; only
            # the shortfall demands fresh chunks (fragmentation aside)
            slack = sum(ext[1] for ext in space.extents)
            short = nbytes - slack
            if short > 0:
                fresh[space.memory] += -(-short // layout.chunk_size)
        return all(
            layout.free_list_for(kind).free_count >= count
            for kind, count in fresh.items()
            if count
        )

    # -- the nursery/observer cycle --

    def _run_young_cycle(self, live: set[int]) -> None:
        heap = self.heap
        if self.inspect_hook is not None:
            self.inspect_hook("minor", frozenset(live))

        nursery_live = sorted(
            (heap.objects[oid] for oid in live if heap.objects[oid].space == NURSERY),
            key=lambda r: r.addr,
        )
        to_observer = sum(r.size for r in nursery_live if not r.large) if heap.observer else 0
        moved_out: list[ObjectRecord] = []

        if heap.observer is not None and heap.observer.free < to_observer:
            moved_out.extend(self._evacuate_observer(live))

        stats = CollectionStats("minor")
        stats.objects_scanned = len(live)
        stats.space_used_before = heap.nursery.used
        for rec in nursery_live:
            if rec.large:
                dest = LOS_PCM
            else:
                dest = route_survivor(self.config, rec, Phase.MINOR)
            if dest == OBSERVER:
                assert heap.observer is not None
                new_addr = heap.observer.alloc(rec.size)
                assert new_addr is not None, "observer evacuation left too little room"
            else:
                new_addr = self._mature_alloc(dest, rec.size)
                moved_out.append(rec)
            self._copy(rec, new_addr, dest, stats)
        heap.nursery.reset()

        stats.reclaimed_objects = self._reclaim_dead_young(live)
        self._remember_edges_from(moved_out)
        self._prune_remset()
        self.collections.append(stats)
        if heap.strict_checks:
            heap.check_placement()

    def _evacuate_observer(self, live: set[int]) -> list[ObjectRecord]:
        heap = self.heap
        stats = CollectionStats("observer")
        observer_live = sorted(
            (heap.objects[oid] for oid in live if heap.objects[oid].space == OBSERVER),
            key=lambda r: r.addr,
        )
        stats.objects_scanned = len(observer_live)
        stats.space_used_before = heap.observer.used
        for rec in observer_live:
            dest = route_survivor(self.config, rec, Phase.OBSERVER)
            new_addr = self._mature_alloc(dest, rec.size)
            self._copy(rec, new_addr, dest, stats)
        heap.observer.reset()
        self.collections.append(stats)
        return observer_live

    def _mature_alloc(self, space_name: str, size: int) -> int:
        try:
            return self.heap.free_list_spaces[space_name].alloc(size)
        except OutOfChunks as exc:
            raise HeapExhausted(str(exc)) from exc

    def _copy(self, rec: ObjectRecord, new_addr: int, dest: str, stats: CollectionStats) -> None:
        heap = self.heap
        heap.emit(rec.addr, rec.size, False, rec.space, collector=True, tally="copy_read")
        heap.emit(new_addr, rec.size, True, dest, collector=True, tally="copy_write")
        heap.system.clock.advance(1, 2 * rec.size, collector=True)
        rec.addr = new_addr
        rec.space = dest
        rec.write_count = 0  # residency changed; observation restarts
        stats.copied_objects += 1
        stats.copied_bytes[dest] = stats.copied_bytes.get(dest, 0) + rec.size
        stats.evacuated_bytes += rec.size

    def _reclaim_dead_young(self, live: set[int]) -> int:
        heap = self.heap
        dead = [
            oid
            for oid, rec in heap.objects.items()
            if oid not in live and heap.is_young_addr(rec.addr)
        ]
        for oid in dead:
            del heap.objects[oid]
        return len(dead)

    def _remember_edges_from(self, moved_out: list[ObjectRecord]) -> None:
        """Objects that just left the young region may still point into it."""
        heap = self.heap
        for rec in moved_out:
            for slot, cid in enumerate(rec.refs):
                if not cid:
                    continue
                child = heap.objects.get(cid)
                if child is not None and heap.is_young_addr(child.addr):
                    heap.remset.add((rec.id, slot))

    def _prune_remset(self) -> None:
        heap = self.heap
        keep = set()
        for pid, slot in heap.remset:
            parent = heap.objects.get(pid)
            if parent is None or heap.is_young_addr(parent.addr) or slot >= len(parent.refs):
                continue
            cid = parent.refs[slot]
            if not cid:
                continue
            child = heap.objects.get(cid)
            if child is not None and heap.is_young_addr(child.addr):
                keep.add((pid, slot))
        heap.remset = keep

    # -- full collection --

    def collect_major(self) -> CollectionStats:
        heap = self.heap
        config = self.config
        live = self._full_closure()
        if self.inspect_hook is not None:
            self.inspect_hook("major", frozenset(live))

        stats = CollectionStats("major")
        stats.objects_scanned = len(live)
        live_recs = sorted((heap.objects[oid] for oid in live), key=lambda r: r.addr)
        for rec in live_recs:
            self._mark(rec, stats)
        if config.loo:
            for rec in live_recs:
                if (
                    rec.large
                    and rec.space == LOS_PCM
                    and rec.write_count >= config.large_relocation_threshold
                ):
                    self._relocate_large(rec, stats)

        intervals: dict[str, list[tuple[int, int]]] = {name: [] for name in heap.free_list_spaces}
        for rec in live_recs:
            if rec.space in intervals:
                intervals[rec.space].append((rec.addr, rec.size))
            if rec.meta_addr is not None:
                intervals["meta-dram"].append((rec.meta_addr, META_SLOT_SIZE))
        for name, space in heap.free_list_spaces.items():
            space.sweep(sorted(intervals[name]))

        dead = [oid for oid in heap.objects if oid not in live]
        for oid in dead:
            del heap.objects[oid]
        stats.reclaimed_objects = len(dead)

        # the relocation window restarts at each full collection
        for rec in live_recs:
            if rec.large and rec.space == LOS_PCM:
                rec.write_count = 0

        self._prune_remset()
        stats.live_bytes_after = heap.mature_occupancy()
        self.collections.append(stats)
        if heap.strict_checks:
            heap.check_placement()
        if stats.live_bytes_after >= config.heap_budget:
            raise HeapExhausted(
                f"{stats.live_bytes_after} live bytes exceed the {config.heap_budget}-byte budget"
            )
        return stats

    def _mark(self, rec: ObjectRecord, stats: CollectionStats) -> None:
        heap = self.heap
        if self.config.mdo and heap.space_map[rec.space].memory is MemoryKind.PCM:
            if rec.meta_addr is None:
                rec.meta_addr = heap.free_list_spaces["meta-dram"].alloc(META_SLOT_SIZE)
            target, space = rec.meta_addr, "meta-dram"
        else:
            target, space = rec.addr, rec.space
        line = heap.system.cache.line_size
        line_base = (target // line) * line
        heap.emit(line_base, line, True, space, collector=True, tally="mark")
        heap.system.clock.advance(1, line, collector=True)
        stats.mark_writes += 1
        if line_base < heap.layout.split:
            stats.mark_writes_pcm += 1

    def _relocate_large(self, rec: ObjectRecord, stats: CollectionStats) -> None:
        try:
            new_addr = self.heap.free_list_spaces[LOS_DRAM].alloc(rec.size)
        except OutOfChunks as exc:
            raise HeapExhausted(str(exc)) from exc
        self._copy(rec, new_addr, LOS_DRAM, stats)
        rec.meta_addr = None  # the DRAM shadow slot is only for PCM residents
        stats.large_relocated += 1

    # -- aggregate queries for reports --

    def collection_counts(self) -> dict[str, int]:
        out = {"minor": 0, "observer": 0, "major": 0}
        for st in self.collections:
            out[st.kind] += 1
        return out


def build_instance(
    config: CollectorConfig,
    system,
    instance_id: int = 0,
    **heap_kwargs,
) -> HeapInstance:
    """Construct a heap with its collection engine attached."""
    heap = HeapInstance(instance_id, config, system, **heap_kwargs)
    GcEngine(heap)
    return heap
