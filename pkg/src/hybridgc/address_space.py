"""Chunked virtual address range split between DRAM and PCM.

The managed heap is one contiguous range starting at address 0. The low
half is backed by PCM, the high half by DRAM, and each half is carved
into fixed-size chunks handed out through a per-half free list. Chunks
are recycled without unmapping: the ``mapped`` flag goes up on first
reservation and never comes back down.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from enum import Enum

from .errors import AddressRangeError, ConfigError, DoubleFree, OutOfChunks


class MemoryKind(Enum):
    DRAM = "DRAM"
    PCM = "PCM"


@dataclass(slots=True)
class ChunkDescriptor:
    index: int
    base: int
    size: int
    kind: MemoryKind
    in_use: bool = False
    owner: str | None = None  # space identifier while reserved
    mapped: bool = False  # monotonic: set on first reservation


@dataclass(slots=True)
class BindEvent:
    """Record of a chunk's first reservation (its backing-store bind)."""

    chunk_index: int
    kind: MemoryKind
    owner: str


class FreeList:
    """Free chunks of one memory kind, handed out lowest index first."""

    def __init__(self, kind: MemoryKind, chunks: list[ChunkDescriptor]):
        self.kind = kind
        self.chunks = chunks
        self._by_index = {c.index: c for c in chunks}
        self.free_indices = sorted(self._by_index)  # ascending

    @property
    def total(self) -> int:
        return len(self.chunks)

    @property
    def free_count(self) -> int:
        return len(self.free_indices)

    @property
    def in_use_count(self) -> int:
        return self.total - self.free_count

    def reserve(self, owner: str) -> ChunkDescriptor:
        if not self.free_indices:
            raise OutOfChunks(f"no free {self.kind.value} chunk for {owner!r}")
        index = self.free_indices.pop(0)
        return self._hand_out(index, owner)

    def reserve_index(self, index: int, owner: str) -> ChunkDescriptor:
        """Reserve one specific chunk; used for boot-reserved ranges."""
        pos = bisect.bisect_left(self.free_indices, index)
        if pos >= len(self.free_indices) or self.free_indices[pos] != index:
            raise OutOfChunks(f"{self.kind.value} chunk {index} is not free")
        self.free_indices.pop(pos)
        return self._hand_out(index, owner)

    def _hand_out(self, index: int, owner: str) -> ChunkDescriptor:
        chunk = self._by_index[index]
        assert not chunk.in_use
        chunk.in_use = True
        chunk.owner = owner
        first_bind = not chunk.mapped
        chunk.mapped = True
        if first_bind:
            self.bind_log.append(BindEvent(index, self.kind, owner))
        self._check_conservation()
        return chunk

    def release(self, chunk: ChunkDescriptor) -> None:
        if not chunk.in_use:
            raise DoubleFree(f"chunk {chunk.index} released while free")
        if chunk.index not in self._by_index:
            raise ConfigError(f"chunk {chunk.index} does not belong to the {self.kind.value} list")
        chunk.in_use = False
        chunk.owner = None
        # mapped stays True: the backing store is kept for recycling
        bisect.insort(self.free_indices, chunk.index)
        self._check_conservation()

    # One bind log shared per layout; assigned by init_layout.
    bind_log: list[BindEvent]

    def _check_conservation(self) -> None:
        assert self.free_count + self.in_use_count == self.total


@dataclass
class HeapLayout:
    """Geometry of the managed range plus its two chunk free lists."""

    heap_base: int
    heap_size: int
    chunk_size: int
    split: int  # lowest DRAM address; everything below is PCM
    chunks: list[ChunkDescriptor]
    dram: FreeList
    pcm: FreeList
    bind_log: list[BindEvent] = field(default_factory=list)

    @property
    def heap_top(self) -> int:
        return self.heap_base + self.heap_size

    def region_of(self, addr: int) -> MemoryKind:
        if not self.heap_base <= addr < self.heap_top:
            raise AddressRangeError(f"address {addr:#x} outside heap [{self.heap_base:#x}, {self.heap_top:#x})")
        return MemoryKind.PCM if addr < self.split else MemoryKind.DRAM

    def free_list_for(self, kind: MemoryKind) -> FreeList:
        return self.dram if kind is MemoryKind.DRAM else self.pcm

    def chunk_at(self, addr: int) -> ChunkDescriptor:
        self.region_of(addr)  # range check
        return self.chunks[(addr - self.heap_base) // self.chunk_size]

    def reserve_range(self, lo: int, hi: int, owner: str) -> list[ChunkDescriptor]:
        """Reserve the specific chunks covering [lo, hi); for fixed spaces."""
        if not (self.heap_base <= lo < hi <= self.heap_top):
            raise AddressRangeError(f"range [{lo:#x}, {hi:#x}) outside heap")
        first = (lo - self.heap_base) // self.chunk_size
        last = (hi - 1 - self.heap_base) // self.chunk_size
        out = []
        for index in range(first, last + 1):
            kind = self.chunks[index].kind
            out.append(self.free_list_for(kind).reserve_index(index, owner))
        return out

    def release_chunk(self, chunk: ChunkDescriptor) -> None:
        self.free_list_for(chunk.kind).release(chunk)

    def check_invariants(self) -> None:
        half = len(self.chunks) // 2
        assert self.pcm.free_count + self.pcm.in_use_count == half
        assert self.dram.free_count + self.dram.in_use_count == half
        bound = {e.chunk_index for e in self.bind_log}
        assert len(bound) == len(self.bind_log), "chunk bound twice"
        for c in self.chunks:
            if c.in_use:
                assert c.mapped and c.owner is not None


def init_layout(heap_size: int, chunk_size: int, *, heap_base: int = 0) -> HeapLayout:
    """Build the split address range with both halves fully free.

    ``heap_size`` must divide evenly into two halves of whole chunks.
    """
    if heap_size <= 0 or chunk_size <= 0:
        raise ConfigError("heap and chunk sizes must be positive")
    if heap_size % (2 * chunk_size) != 0:
        raise ConfigError(
            f"heap size {heap_size} is not divisible by twice the chunk size {chunk_size}"
        )
    n = heap_size // chunk_size
    split = heap_base + heap_size // 2
    chunks = []
    for i in range(n):
        base = heap_base + i * chunk_size
        kind = MemoryKind.PCM if base < split else MemoryKind.DRAM
        chunks.append(ChunkDescriptor(index=i, base=base, size=chunk_size, kind=kind))
    pcm = FreeList(MemoryKind.PCM, chunks[: n // 2])
    dram = FreeList(MemoryKind.DRAM, chunks[n // 2 :])
    layout = HeapLayout(
        heap_base=heap_base,
        heap_size=heap_size,
        chunk_size=chunk_size,
        split=split,
        chunks=chunks,
        dram=dram,
        pcm=pcm,
    )
    pcm.bind_log = layout.bind_log
    dram.bind_log = layout.bind_log
    return layout


def region_of(layout: HeapLayout, addr: int) -> MemoryKind:
    """Module-level spelling of :meth:`HeapLayout.region_of`."""
    return layout.region_of(addr)
