"""Stack (bump) allocator that backs activations and measures peak memory.

The arena owns a flat float64 buffer with one slot per accounted element;
``elem_bytes`` only scales the byte counters.  Allocation is last-in,
first-out.  Every alloc/free is logged with the op scope that was active, so
a run can be replayed and audited afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ArenaOverflow(MemoryError):
    """An allocation would push the cursor past capacity."""


class ArenaMisuse(RuntimeError):
    """A free that breaks stack order or targets a dead block."""


@dataclass(frozen=True)
class TraceEvent:
    tunnel: int | None
    op: str | None
    action: str  # "alloc" or "free"
    nbytes: int
    cursor_after: int


@dataclass(eq=False)
class Block:
    arena: "Arena"
    offset: int  # in elements
    shape: tuple[int, ...]
    tag: str = ""

    @property
    def n_elems(self) -> int:
        n = 1
        for d in self.shape:
            n *= d
        return n

    @property
    def nbytes(self) -> int:
        return self.n_elems * self.arena.elem_bytes

    @property
    def array(self) -> np.ndarray:
        return self.arena._buf[self.offset : self.offset + self.n_elems].reshape(self.shape)


class Arena:
    def __init__(self, capacity_bytes: int, elem_bytes: int = 4):
        if capacity_bytes < 1:
            raise ValueError("arena capacity must be >= 1 byte")
        if elem_bytes not in (1, 2, 4):
            raise ValueError(f"elem_bytes must be 1, 2 or 4, got {elem_bytes}")
        self.capacity_bytes = int(capacity_bytes)
        self.elem_bytes = elem_bytes
        self.cursor = 0  # bytes
        self.high_water_bytes = 0
        self.events: list[TraceEvent] = []
        self.scope: tuple[int | None, str | None] = (None, None)
        # np.empty only reserves address space; pages are touched on use
        self._buf = np.empty(self.capacity_bytes // elem_bytes, dtype=np.float64)
        self._live: list[Block] = []

    def __repr__(self):
        return (f"Arena(capacity={self.capacity_bytes}, cursor={self.cursor}, "
                f"high_water={self.high_water_bytes}, elem_bytes={self.elem_bytes})")

    @property
    def live_blocks(self) -> tuple[Block, ...]:
        return tuple(self._live)

    def _log(self, action: str, nbytes: int):
        tunnel, op = self.scope
        self.events.append(TraceEvent(tunnel, op, action, nbytes, self.cursor))

    def alloc(self, shape, tag: str = "", zero: bool = False) -> Block:
        shape = tuple(int(d) for d in np.atleast_1d(shape))
        block = Block(self, self.cursor // self.elem_bytes, shape, tag)
        need = block.nbytes
        if self.cursor + need > self.capacity_bytes:
            tunnel, op = self.scope
            where = f" in tunnel {tunnel} op {op}" if op is not None else ""
            raise ArenaOverflow(
                f"arena overflow{where}: {tag or 'block'} needs {need} bytes, "
                f"{self.capacity_bytes - self.cursor} of {self.capacity_bytes} free"
            )
        self.cursor += need
        self.high_water_bytes = max(self.high_water_bytes, self.cursor)
        self._live.append(block)
        self._log("alloc", need)
        if zero:
            block.array[...] = 0.0
        return block

    def free(self, block: Block):
        if not self._live or self._live[-1] is not block:
            raise ArenaMisuse(f"free of {block.tag or 'block'} out of stack order")
        self._live.pop()
        self.cursor -= block.nbytes
        self._log("free", block.nbytes)

    def sink(self, lower: Block, upper: Block) -> Block:
        """Release ``lower`` and slide ``upper`` down into its slot.

        ``upper`` must be the top block and ``lower`` the one directly under
        it.  This is how a layer's output replaces its input without
        breaking stack order.
        """
        if len(self._live) < 2 or self._live[-1] is not upper or self._live[-2] is not lower:
            raise ArenaMisuse("sink needs (lower, upper) to be the two topmost blocks")
        src = upper.array
        self.free(upper)
        self.free(lower)
        moved = self.alloc(upper.shape, upper.tag)
        moved.array[...] = src  # numpy buffers overlapping copies
        return moved

    def stage(self, x: np.ndarray, tag: str = "") -> Block:
        """Allocate a block and copy ``x`` into it."""
        block = self.alloc(x.shape, tag)
        block.array[...] = x
        return block

    def unwind(self, depth: int):
        """Pop live blocks until only ``depth`` remain (error cleanup)."""
        while len(self._live) > depth:
            self.free(self._live[-1])

    def reset(self):
        self.cursor = 0
        self.high_water_bytes = 0
        self.events.clear()
        self._live.clear()
