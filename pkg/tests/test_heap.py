import pytest

from hybridgc.address_space import MemoryKind
from hybridgc.config import Collector, CollectorConfig
from hybridgc.errors import ConfigError, HeapExhausted, TraceError
from hybridgc.heap import (
    BOOT,
    LOS_DRAM,
    LOS_PCM,
    MATURE_DRAM,
    MATURE_PCM,
    META_DRAM,
    META_PCM,
    NURSERY,
    OBSERVER,
    align8,
    make_space_map,
)
from support import KIB, MIB, small_heap


def test_align8():
    assert align8(0) == 0
    assert align8(1) == 8
    assert align8(8) == 8
    assert align8(23) == 24


def kinds(space_map):
    return {name: desc.memory for name, desc in space_map.items()}


class TestSpaceMaps:
    def test_pcm_only_is_all_pcm(self):
        got = kinds(make_space_map(CollectorConfig(variant=Collector.PCM_ONLY)))
        assert got == {
            BOOT: MemoryKind.PCM,
            NURSERY: MemoryKind.PCM,
            MATURE_PCM: MemoryKind.PCM,
            LOS_PCM: MemoryKind.PCM,
            META_PCM: MemoryKind.PCM,
        }

    def test_kg_n_moves_young_to_dram(self):
        got = kinds(make_space_map(CollectorConfig(variant=Collector.KG_N)))
        assert got == {
            BOOT: MemoryKind.DRAM,
            NURSERY: MemoryKind.DRAM,
            MATURE_PCM: MemoryKind.PCM,
            LOS_PCM: MemoryKind.PCM,
            META_PCM: MemoryKind.PCM,
        }

    def test_loo_variants_add_dram_los(self):
        got = kinds(make_space_map(CollectorConfig(variant=Collector.KG_N_LOO)))
        assert got[LOS_DRAM] is MemoryKind.DRAM
        assert OBSERVER not in got
        assert kinds(make_space_map(CollectorConfig(variant=Collector.KG_B))).keys() == {
            BOOT, NURSERY, MATURE_PCM, LOS_PCM, META_PCM
        }

    def test_write_sampling_full_map(self):
        got = kinds(make_space_map(CollectorConfig(variant=Collector.KG_W)))
        assert got == {
            BOOT: MemoryKind.DRAM,
            NURSERY: MemoryKind.DRAM,
            OBSERVER: MemoryKind.DRAM,
            MATURE_DRAM: MemoryKind.DRAM,
            MATURE_PCM: MemoryKind.PCM,
            LOS_DRAM: MemoryKind.DRAM,
            LOS_PCM: MemoryKind.PCM,
            META_PCM: MemoryKind.PCM,
            META_DRAM: MemoryKind.DRAM,
        }

    def test_mdo_ablation_has_no_dram_metadata(self):
        got = kinds(make_space_map(CollectorConfig(variant=Collector.KG_W_NO_MDO)))
        assert META_DRAM not in got
        assert OBSERVER in got


class TestPlacement:
    def test_young_region_sits_at_the_top_of_its_half(self):
        heap, _ = small_heap("KG-N", nursery=64 * KIB, heap_size=8 * MIB)
        assert heap.nursery.hi == heap.layout.heap_top
        assert heap.nursery.capacity == 64 * KIB
        assert heap.layout.region_of(heap.nursery.lo) is MemoryKind.DRAM
        assert heap.observer is None
        assert (heap.young_lo, heap.young_hi) == (heap.nursery.lo, heap.nursery.hi)

    def test_pcm_only_nursery_below_split(self):
        heap, _ = small_heap("PCM-Only", nursery=64 * KIB, heap_size=8 * MIB)
        assert heap.nursery.hi == heap.layout.split
        assert heap.layout.region_of(heap.nursery.lo) is MemoryKind.PCM

    def test_observer_directly_below_nursery(self):
        heap, _ = small_heap("KG-W", nursery=64 * KIB, observer_multiplier=2.0)
        assert heap.observer is not None
        assert heap.observer.hi == heap.nursery.lo
        assert heap.observer.capacity == 128 * KIB
        assert heap.young_lo == heap.observer.lo
        assert heap.is_young_addr(heap.observer.lo)
        assert heap.is_young_addr(heap.nursery.hi - 1)
        assert not heap.is_young_addr(heap.observer.lo - 1)

    def test_boot_at_the_bottom_of_its_half(self):
        kg = small_heap("KG-N", boot_size=16 * KIB)[0]
        assert kg.boot_space.lo == kg.layout.split
        pcm = small_heap("PCM-Only", boot_size=16 * KIB)[0]
        assert pcm.boot_space.lo == 0

    def test_young_region_must_fit(self):
        with pytest.raises(ConfigError):
            small_heap("KG-W", nursery=2 * MIB, observer_multiplier=2.0, heap_size=8 * MIB,
                       budget=8 * MIB)  # 6 MiB young > 4 MiB half

    def test_boot_objects_seeded_silently(self):
        heap, system = small_heap("KG-N", boot_size=16 * KIB, boot_object_size=256)
        assert len(heap.boot_ids) == 64
        assert heap.boot_ids[0] == -1 and heap.boot_ids[-1] == -64
        rec = heap.objects[-1]
        assert rec.space == BOOT and len(rec.refs) == 4
        # the boot image predates the trace: no traffic, no simulated time
        assert system.counters.total_write_bytes() == 0
        assert system.clock.now_ns == 0.0


class TestAlloc:
    def test_bump_allocation_is_contiguous(self):
        heap, system = small_heap("KG-N")
        a = heap.alloc_object(1, 20, 2)
        b = heap.alloc_object(2, 100, 0)
        assert a.addr == heap.nursery.lo
        assert a.size == 32  # padded to 16B header + 2 slots, 8B aligned
        assert b.addr == a.addr + 32
        assert b.size == align8(100)
        assert system.counters.write_bytes[(0, MemoryKind.DRAM, NURSERY)] == 32 + 104

    def test_zeroing_toggle(self):
        heap, system = small_heap("KG-N", zeroing=False)
        heap.alloc_object(1, 64, 0)
        assert heap.emitted["zero"] == 0
        assert system.counters.total_write_bytes() == 0

    def test_large_goes_to_los(self):
        heap, _ = small_heap("KG-N")  # loo off
        rec = heap.alloc_object(1, 8 * KIB, 0)
        assert rec.large and rec.space == LOS_PCM
        assert heap.layout.region_of(rec.addr) is MemoryKind.PCM
        assert heap.free_list_spaces[LOS_PCM].allocated_bytes == 8 * KIB

    def test_large_hint_forces_los(self):
        heap, _ = small_heap("KG-N")
        rec = heap.alloc_object(1, 100, 0, large_hint=True)
        assert rec.large and rec.space == LOS_PCM

    def test_loo_admits_small_large_objects(self):
        # admission cap is nursery/8 = 8 KiB, exactly the large threshold
        heap, _ = small_heap("KG-W", nursery=64 * KIB)
        rec = heap.alloc_object(1, 8 * KIB, 0)
        assert rec.large and rec.space == NURSERY

    def test_loo_respects_the_size_cap(self):
        heap, _ = small_heap("KG-W", nursery=64 * KIB)
        rec = heap.alloc_object(1, 9 * KIB, 0)  # over nursery/8
        assert rec.space == LOS_PCM

    def test_alloc_id_rules(self):
        heap, _ = small_heap("KG-N")
        heap.alloc_object(1, 64, 0)
        with pytest.raises(TraceError):
            heap.alloc_object(1, 64, 0)  # reuse
        with pytest.raises(TraceError):
            heap.alloc_object(0, 64, 0)
        with pytest.raises(TraceError):
            heap.alloc_object(-5, 64, 0)
        with pytest.raises(TraceError):
            heap.alloc_object(3, 0, 0)
        with pytest.raises(TraceError):
            heap.alloc_object(3, 64, -1)

    def test_object_exceeding_chunk_size(self):
        heap, _ = small_heap("KG-N")  # 64 KiB chunks
        with pytest.raises(HeapExhausted):
            heap.alloc_object(1, 70 * KIB, 0)

    def test_object_too_big_for_empty_nursery(self):
        # 5 KiB is below the raised large threshold, so it takes the small
        # path into a 4 KiB nursery and cannot ever fit
        heap, _ = small_heap("KG-N", nursery=4 * KIB, large_threshold=64 * KIB)
        with pytest.raises(HeapExhausted):
            heap.alloc_object(1, 5 * KIB, 0)


class TestMutatorOps:
    def test_data_write_and_read(self):
        heap, system = small_heap("KG-N", zeroing=False)
        rec = heap.alloc_object(1, 128, 0)
        heap.write_data(1, 16, 32)
        heap.read_data(1, 0, 8)
        assert rec.write_count == 1
        assert heap.emitted["mutator_write"] == 32
        assert heap.emitted["mutator_read"] == 8
        assert system.counters.write_bytes[(0, MemoryKind.DRAM, NURSERY)] == 32
        assert system.counters.read_bytes[(0, MemoryKind.DRAM, NURSERY)] == 8

    def test_bounds_checks(self):
        heap, _ = small_heap("KG-N")
        heap.alloc_object(1, 64, 0)
        heap.write_data(1, 0, 64)  # the padded extent is writable
        with pytest.raises(TraceError):
            heap.write_data(1, 60, 8)
        with pytest.raises(TraceError):
            heap.read_data(1, -1, 4)
        with pytest.raises(TraceError):
            heap.write_data(2, 0, 4)  # never allocated

    def test_boot_objects_are_writable(self):
        heap, system = small_heap("KG-N")
        heap.write_data(-3, 0, 16)
        assert heap.objects[-3].write_count == 1
        assert system.counters.write_bytes[(0, MemoryKind.DRAM, BOOT)] == 16

    def test_ref_write_emits_one_line(self):
        heap, system = small_heap("KG-N", zeroing=False)
        heap.alloc_object(1, 64, 2)
        heap.alloc_object(2, 64, 0)
        heap.write_ref(1, 1, 2)
        parent = heap.objects[1]
        assert parent.refs == [0, 2]
        assert parent.write_count == 1
        assert heap.emitted["barrier"] == 64
        # both objects young: nothing to remember
        assert heap.remset == set()
        heap.write_ref(1, 1, 0)  # clearing a slot is fine
        assert parent.refs == [0, 0]

    def test_ref_slot_validation(self):
        heap, _ = small_heap("KG-N")
        heap.alloc_object(1, 64, 1)
        with pytest.raises(TraceError):
            heap.write_ref(1, 1, 0)  # only slot 0 exists
        with pytest.raises(TraceError):
            heap.write_ref(1, 0, 99)  # dangling child

    def test_boot_to_young_ref_is_remembered(self):
        heap, _ = small_heap("KG-N")
        heap.alloc_object(7, 64, 0)
        heap.write_ref(-1, 0, 7)  # boot space is outside the young region
        assert (-1, 0) in heap.remset

    def test_roots(self):
        heap, _ = small_heap("KG-N")
        heap.alloc_object(1, 64, 0)
        heap.set_root(1, True)
        assert 1 in heap.roots
        heap.set_root(1, False)
        heap.set_root(1, False)  # unrooting twice is harmless
        assert 1 not in heap.roots
        with pytest.raises(TraceError):
            heap.set_root(99, True)


def test_mature_occupancy_ignores_metadata():
    heap, _ = small_heap("KG-W", nursery=64 * KIB, budget=512 * KIB)
    heap.alloc_object(1, 9 * KIB, 0)  # over the admission cap: lands in los-pcm
    heap.set_root(1, True)
    heap.gc.collect_major()
    meta = heap.free_list_spaces[META_DRAM].allocated_bytes
    assert meta == 16  # the one live PCM resident got a DRAM shadow mark slot
    payload = sum(
        s.allocated_bytes
        for name, s in heap.free_list_spaces.items()
        if name not in (META_DRAM, META_PCM)
    )
    assert heap.mature_occupancy() == payload == 9 * KIB
