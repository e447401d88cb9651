"""Independent reachability over a shadow of the object graph.

Replays only the structural side of a trace (allocations, reference
stores, root flips), with no spaces, addresses, or write barriers, so
expected live sets can be computed without trusting the collector.
"""

import random

from hybridgc.errors import HeapExhausted
from hybridgc.heap import BOOT_OBJECT_REFS
from hybridgc.workloads import Alloc, ReadOp, RefOp, RootOp, UnrootOp, WriteOp

from support import KIB, MIB, small_heap


class ShadowGraph:
    def __init__(self, boot_ids):
        self.slots: dict[int, list[int]] = {oid: [0] * BOOT_OBJECT_REFS for oid in boot_ids}
        self.boot_ids = list(boot_ids)
        self.roots: set[int] = set()

    def apply(self, op):
        match op:
            case Alloc(oid=oid, n_refs=n):
                self.slots[oid] = [0] * n
            case RefOp(parent=parent, slot=slot, child=child):
                self.slots[parent][slot] = child
            case RootOp(oid=oid):
                self.roots.add(oid)
            case UnrootOp(oid=oid):
                self.roots.discard(oid)
            case WriteOp() | ReadOp():
                pass

    def reachable(self) -> set[int]:
        """Everything a full collection must keep; boot objects are roots."""
        live: set[int] = set()
        stack = list(self.roots) + self.boot_ids
        while stack:
            oid = stack.pop()
            if oid in live:
                continue
            live.add(oid)
            stack.extend(child for child in self.slots[oid] if child)
        return live

    def young_live(self, heap) -> set[int]:
        """What a minor collection must keep, given the heap's placements.

        Seeds are young roots plus every young child referenced from any
        object outside the young region; the walk then stays young. This
        is exactly the guarantee the write barrier has to uphold.
        """

        def young(oid: int) -> bool:
            rec = heap.objects.get(oid)
            return rec is not None and heap.is_young_addr(rec.addr)

        stack = [oid for oid in self.roots if young(oid)]
        for pid, rec in heap.objects.items():
            if young(pid):
                continue
            stack.extend(c for c in self.slots[pid] if c and young(c))
        live: set[int] = set()
        while stack:
            oid = stack.pop()
            if oid in live:
                continue
            live.add(oid)
            stack.extend(c for c in self.slots[oid] if c and young(c))
        return live


def random_ops(rng: random.Random, n_objects: int) -> list:
    """A structured-random trace that only ever touches live ids."""
    ops = []
    rooted: list[int] = []
    meta: dict[int, tuple[int, int]] = {}  # id -> (size, n_slots)
    boot_parents = (-1, -2, -3, -4)
    for oid in range(1, n_objects + 1):
        if rng.random() < 0.06:
            n_slots = rng.randrange(0, 3)
            size = rng.randrange(8 * KIB, 20 * KIB)
            large = True
        else:
            n_slots = rng.randrange(0, 4)
            size = max(rng.randrange(16, 512), 16 + 8 * n_slots)
            large = False
        ops.append(Alloc(oid, size, n_slots, large))
        ops.append(RootOp(oid))
        rooted.append(oid)
        meta[oid] = (size, n_slots)

        for _ in range(rng.randrange(0, 5)):
            r = rng.random()
            tid = rooted[rng.randrange(len(rooted))]
            tsize, tslots = meta[tid]
            if r < 0.30:
                length = min(tsize, rng.choice((8, 32, 64)))
                ops.append(WriteOp(tid, rng.randrange(0, tsize - length + 1), length))
            elif r < 0.45:
                length = min(tsize, 32)
                ops.append(ReadOp(tid, rng.randrange(0, tsize - length + 1), length))
            elif r < 0.80:
                if rng.random() < 0.15:
                    pid, pslots = rng.choice(boot_parents), BOOT_OBJECT_REFS
                else:
                    pid = rooted[rng.randrange(len(rooted))]
                    pslots = meta[pid][1]
                if pslots == 0:
                    continue
                child = 0 if rng.random() < 0.15 else rooted[rng.randrange(len(rooted))]
                ops.append(RefOp(pid, rng.randrange(pslots), child))
                if child and child != pid and len(rooted) > 4 and rng.random() < 0.4:
                    # now held only through that edge, or garbage once
                    # the slot is overwritten; either way never targeted again
                    ops.append(UnrootOp(child))
                    rooted.remove(child)
            elif len(rooted) > 4:
                victim = rooted.pop(rng.randrange(len(rooted)))
                ops.append(UnrootOp(victim))
    return ops


def apply_op(heap, op) -> None:
    match op:
        case Alloc(oid, size, n_refs, large):
            heap.alloc_object(oid, size, n_refs, large)
        case WriteOp(oid, offset, length):
            heap.write_data(oid, offset, length)
        case ReadOp(oid, offset, length):
            heap.read_data(oid, offset, length)
        case RefOp(parent, slot, child):
            heap.write_ref(parent, slot, child)
        case RootOp(oid):
            heap.set_root(oid, True)
        case UnrootOp(oid):
            heap.set_root(oid, False)


def check_collections(seed: int, variant: str, n_objects: int = 1500) -> dict[str, int]:
    """Run one random trace, asserting every live set against the shadow.

    Returns how many collections of each kind were checked.
    """
    ops = random_ops(random.Random(seed), n_objects)
    heap, system = small_heap(
        variant,
        nursery=64 * KIB,
        observer_multiplier=1.0,
        budget=1 * MIB,
        heap_size=16 * MIB,
        chunk_size=64 * KIB,
        zeroing=False,
    )
    shadow = ShadowGraph(heap.boot_ids)
    checks = {"minor": 0, "major": 0}

    def hook(kind: str, live: frozenset) -> None:
        expected = shadow.reachable() if kind == "major" else shadow.young_live(heap)
        assert live == expected, f"{kind} live set mismatch (seed {seed}, {variant})"
        for oid in live:
            assert heap.objects[oid].refs == shadow.slots[oid]
        checks[kind] += 1

    heap.gc.inspect_hook = hook
    try:
        for op in ops:
            apply_op(heap, op)
            shadow.apply(op)
        heap.gc.collect_major()
    except HeapExhausted:
        pass
    heap.check_placement()
    system.counters.check_write_conservation()
    return checks
