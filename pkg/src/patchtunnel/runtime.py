"""Arena-backed end-to-end inference over patch tunnels.

Execution order for one image:

1. push the head accumulator (``c_final`` elements) on the arena;
2. for each patch in turn: stage it, run the stem and every bottleneck in
   channel-reordered mode (each op's output slides down over its input),
   global-average-pool the final map straight into the accumulator, pop;
3. push the class-score vector and apply the fully connected head.

The image itself is treated as external input (sensor/flash) and is not
charged to the arena; only the current patch is.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arena import Arena, ArenaOverflow, Block, TraceEvent
from .bottleneck import (
    BottleneckSpec,
    BottleneckWeights,
    bottleneck_footprint,
    bottleneck_reordered,
    bottleneck_reordered_block,
    bottleneck_standard,
)
from .network import NetworkSpec, NetworkWeights, TunnelSpec, TunnelWeights
from .planner import MemoryBudget, plan_network
from .segmentation import extract_patches, plan_regions
from .tensor import ShapeError, TensorShape, conv2d, shape_of

__all__ = [
    "Arena",
    "ArenaOverflow",
    "BudgetExceeded",
    "EquivalenceReport",
    "ExecutionTrace",
    "NetworkSpec",
    "execute_network",
    "make_arena",
    "run_tunnel",
    "verify_equivalence",
]


class BudgetExceeded(RuntimeError):
    """The static plan already says the network cannot fit."""


def make_arena(budget: MemoryBudget) -> Arena:
    return Arena(budget.budget_bytes, budget.elem_bytes)


@dataclass(frozen=True)
class OpRecord:
    tunnel: int | None
    op: str | None
    allocated_bytes: int
    freed_bytes: int
    peak_cursor: int
    cursor_after: int


@dataclass(frozen=True)
class ExecutionTrace:
    events: tuple[TraceEvent, ...]
    high_water_bytes: int
    capacity_bytes: int

    def replay(self) -> int:
        """Recompute the high-water mark from the event log, checking each step."""
        cursor = high = 0
        for ev in self.events:
            cursor += ev.nbytes if ev.action == "alloc" else -ev.nbytes
            if cursor != ev.cursor_after or cursor < 0:
                raise ValueError(f"trace inconsistent at {ev}")
            high = max(high, cursor)
        return high

    def op_records(self) -> list[OpRecord]:
        records: list[OpRecord] = []
        cur = None
        alloc = freed = peak = 0
        for ev in self.events:
            key = (ev.tunnel, ev.op)
            if key != cur:
                if cur is not None:
                    records.append(OpRecord(*cur, alloc, freed, peak, last))
                cur, alloc, freed, peak = key, 0, 0, 0
            if ev.action == "alloc":
                alloc += ev.nbytes
            else:
                freed += ev.nbytes
            peak = max(peak, ev.cursor_after)
            last = ev.cursor_after
        if cur is not None:
            records.append(OpRecord(*cur, alloc, freed, peak, last))
        return records

    def summary(self) -> str:
        return (f"high_water_bytes={self.high_water_bytes} capacity_bytes={self.capacity_bytes} "
                f"events={len(self.events)}")


def _run_tunnel_into(patch: np.ndarray, tunnel: TunnelSpec, tw: TunnelWeights, arena: Arena,
                     feat: Block, index: int) -> None:
    ops = tunnel.ops()
    arena.scope = (index, f"t{index}.{ops[0][0]}")
    x_blk = arena.stage(patch, tag="patch")
    for (name, op), w in zip(ops, _op_weights(tunnel, tw)):
        arena.scope = (index, f"t{index}.{name}")
        if isinstance(op, BottleneckSpec):
            y_blk = bottleneck_reordered_block(x_blk, op, w, arena)
        else:
            out_shape = op.output_shape(TensorShape(*x_blk.shape))
            y_blk = arena.alloc(tuple(out_shape), tag=f"{name}_out")
            conv2d(x_blk.array, w, op, out=y_blk.array)
        x_blk = arena.sink(x_blk, y_blk)
    arena.scope = (index, f"t{index}.pool")
    feat.array[...] += x_blk.array.mean(axis=(0, 1))
    arena.free(x_blk)


def _op_weights(tunnel: TunnelSpec, tw: TunnelWeights) -> list:
    ws = [tw.stem] if tunnel.stem is not None else []
    return ws + list(tw.blocks)


def run_tunnel(patch, tunnel: TunnelSpec, weights: TunnelWeights, arena: Arena, index: int = 0) -> np.ndarray:
    """Run one tunnel on one patch and return its pooled feature vector.

    The feature vector is the first thing pushed, so the arena's high-water
    mark for the call is ``c_final`` plus the largest op footprint.  The
    arena is back at its entry cursor on return, also after an overflow.
    """
    patch = np.asarray(patch, dtype=np.float64)
    shapes = tunnel.shapes(shape_of(patch))
    depth = len(arena.live_blocks)
    try:
        arena.scope = (index, "feature")
        feat = arena.alloc((shapes[-1].c,), tag="feature", zero=True)
        _run_tunnel_into(patch, tunnel, weights, arena, feat, index)
    except Exception:
        arena.unwind(depth)
        raise
    out = feat.array.copy()
    arena.free(feat)
    return out


def _fc(vec: np.ndarray, fc: np.ndarray, out: np.ndarray) -> None:
    # fixed left-to-right accumulation keeps scores bit-reproducible
    out[...] = 0.0
    for i in range(fc.shape[0]):
        out += vec[i] * fc[i]


def execute_network(net: NetworkSpec, weights: NetworkWeights, image, budget: MemoryBudget,
                    order=None, check_plan: bool = True) -> tuple[np.ndarray, ExecutionTrace]:
    """Budgeted inference: returns (class scores, trace).

    ``order`` permutes tunnel execution (summation makes the result
    order-independent up to rounding).  With ``check_plan`` the static plan
    is consulted first and :class:`BudgetExceeded` is raised without running
    anything.  Any arena overflow aborts the whole inference.
    """
    image = np.asarray(image, dtype=np.float64)
    if shape_of(image) != net.input_shape:
        raise ShapeError(f"image shape {image.shape} does not match network input {tuple(net.input_shape)}")
    weights.check(net)
    if check_plan:
        plan = plan_network(net, budget, "reordered")
        if not plan.within_budget:
            raise BudgetExceeded(
                f"planned peak {plan.peak_bytes} bytes at {plan.peak_op} exceeds budget {budget.budget_bytes}"
            )
    regions = plan_regions(net.input_shape, net.layout)
    order = range(len(regions)) if order is None else list(order)
    if sorted(order) != list(range(len(regions))):
        raise ValueError(f"order must be a permutation of 0..{len(regions) - 1}")

    arena = make_arena(budget)
    arena.scope = (None, "head")
    acc = arena.alloc((net.c_final,), tag="accumulator", zero=True)
    for i in order:
        (patch,) = extract_patches(image, [regions[i]])
        _run_tunnel_into(patch, net.tunnels[i], weights.tunnels[i], arena, acc, i)
    arena.scope = (None, "head.fc")
    scores = arena.alloc((net.num_classes,), tag="scores")
    _fc(acc.array, weights.fc, scores.array)
    result = scores.array.copy()
    arena.free(scores)
    arena.free(acc)
    trace = ExecutionTrace(tuple(arena.events), arena.high_water_bytes, arena.capacity_bytes)
    return result, trace


@dataclass(frozen=True)
class EquivalenceReport:
    trials: int
    max_rel_dev: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_rel_dev <= self.tol


def relative_linf(a: np.ndarray, ref: np.ndarray) -> float:
    """max |a - ref| / max |ref|, defined as 0 when both are all-zero."""
    num = float(np.max(np.abs(a - ref))) if a.size else 0.0
    den = float(np.max(np.abs(ref))) if ref.size else 0.0
    if num == 0.0:
        return 0.0
    return num / den if den > 0 else float("inf")


def verify_equivalence(spec: BottleneckSpec, shape: TensorShape, trials: int = 100, seed: int = 0,
                       tol: float = 1e-5, zero_input: bool = False) -> EquivalenceReport:
    """Compare the reordered schedule against standard execution on random draws.

    The reordered run gets an arena sized to exactly its footprint (fp32
    accounting), so any schedule that needs more memory fails loudly.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    shape = TensorShape(*shape).validate()
    fp = bottleneck_footprint(spec, shape, "reordered").total_elements
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        w = BottleneckWeights.random(spec, rng)
        x = np.zeros(tuple(shape)) if zero_input else rng.standard_normal(tuple(shape))
        if zero_input:
            w.expand_bias = None if w.expand_bias is None else np.zeros_like(w.expand_bias)
            w.dw_bias = None if w.dw_bias is None else np.zeros_like(w.dw_bias)
        ref = bottleneck_standard(x, spec, w)
        got = bottleneck_reordered(x, spec, w, Arena(fp * 4, elem_bytes=4))
        worst = max(worst, relative_linf(got, ref))
    return EquivalenceReport(trials, worst, tol)
