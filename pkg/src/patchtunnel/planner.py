"""Closed-form peak activation accounting for patch-tunnel networks.

Only activations are counted; weights are assumed to stay in flash.  A
dense conv holds its input and output at once.  A reordered bottleneck
holds its input, one expand plane, one depth-wise plane and its output.
Tunnels run one after another, so the network peak is the largest single
op footprint plus whatever stays resident across tunnels (the head
accumulator).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

from .bottleneck import BottleneckFootprint, BottleneckSpec, bottleneck_footprint
from .network import NetworkSpec
from .tensor import ConvParams, TensorShape

__all__ = [
    "BottleneckFootprint",
    "BudgetError",
    "MemoryBudget",
    "MemoryPlan",
    "OpFootprint",
    "bottleneck_footprint",
    "layer_footprint",
    "max_cout_under_budget",
    "plan_network",
]

KB = 1024
_MAX_COUNT = 2**63 - 1


class BudgetError(ValueError):
    """The budget cannot hold even the smallest admissible layer."""


@dataclass(frozen=True)
class MemoryBudget:
    budget_bytes: int
    elem_bytes: int = 4

    def __post_init__(self):
        if self.budget_bytes < 1:
            raise ValueError(f"budget must be >= 1 byte, got {self.budget_bytes}")
        if self.elem_bytes not in (1, 2, 4):
            raise ValueError(f"elem_bytes must be 1, 2 or 4, got {self.elem_bytes}")

    @property
    def budget_elems(self) -> int:
        return self.budget_bytes // self.elem_bytes


def layer_footprint(in_shape: TensorShape, params: ConvParams) -> int:
    """Input plus output elements of one dense conv."""
    in_shape = TensorShape(*in_shape).validate()
    return in_shape.size + params.output_shape(in_shape).size


def max_cout_under_budget(in_shape: TensorShape, k_h: int, k_w: int, s: int, p_h: int, p_w: int,
                          budget: MemoryBudget) -> int:
    """Widest conv output that keeps input + output within the budget."""
    in_shape = TensorShape(*in_shape).validate()
    probe = ConvParams(k_h, k_w, s, p_h, p_w, in_shape.c, 1)
    plane = probe.output_shape(in_shape).size
    room = budget.budget_elems - in_shape.size
    c_out = room // plane if room > 0 else 0
    if c_out < 1:
        raise BudgetError(
            f"budget of {budget.budget_elems} elements cannot hold a {tuple(in_shape)} input "
            f"plus one {plane}-element output channel"
        )
    return c_out


@dataclass(frozen=True)
class OpFootprint:
    op_id: str
    tunnel: int  # -1 for the head
    kind: str  # "conv", "bottleneck", "pool" or "fc"
    elements: int
    bytes: int


@dataclass(frozen=True)
class MemoryPlan:
    per_op: tuple[OpFootprint, ...]
    resident_elements: int
    peak_elements: int
    peak_bytes: int
    peak_op: str
    budget_bytes: int
    elem_bytes: int
    mode: str
    parallel: int = 1

    @property
    def within_budget(self) -> bool:
        return self.peak_bytes <= self.budget_bytes

    def to_dict(self) -> dict:
        d = asdict(self)
        d["per_op"] = [asdict(op) for op in self.per_op]
        d["within_budget"] = self.within_budget
        d["peak_kb"] = self.peak_bytes / KB
        d["accounting"] = "activations only; weights excluded"
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def to_text(self) -> str:
        lines = [f"{'op':<12}{'tunnel':>7}{'kind':>12}{'elements':>12}{'bytes':>12}"]
        for op in self.per_op:
            mark = "  <- peak" if op.op_id == self.peak_op else ""
            lines.append(f"{op.op_id:<12}{op.tunnel:>7}{op.kind:>12}{op.elements:>12}{op.bytes:>12}{mark}")
        verdict = "within budget" if self.within_budget else "OVER BUDGET"
        lines += [
            f"mode: {self.mode}, elem_bytes: {self.elem_bytes}, parallel tunnels: {self.parallel}",
            f"resident (head accumulator): {self.resident_elements} elements",
            f"peak: {self.peak_elements} elements = {self.peak_bytes} bytes "
            f"({self.peak_bytes / KB:.2f} KB) at {self.peak_op}",
            f"budget: {self.budget_bytes} bytes ({self.budget_bytes / KB:.2f} KB) -> {verdict}",
            "accounting: activations only; weights excluded",
        ]
        return "\n".join(lines)


def tunnel_footprints(net: NetworkSpec, index: int, mode: str = "reordered") -> list[tuple[str, str, int]]:
    """(op id, kind, elements) for each op of one tunnel, in execution order."""
    tunnel = net.tunnels[index]
    shape = net.patch_shape
    rows = []
    for name, op in tunnel.ops():
        if isinstance(op, BottleneckSpec):
            elems = bottleneck_footprint(op, shape, mode).total_elements
            kind = "bottleneck"
        else:
            elems = layer_footprint(shape, op)
            kind = "conv"
        rows.append((f"t{index}.{name}", kind, elems))
        shape = op.output_shape(shape)
    # global average pooling reads the final map and adds into the accumulator
    rows.append((f"t{index}.pool", "pool", shape.size))
    return rows


def plan_network(net: NetworkSpec, budget: MemoryBudget, mode: str = "reordered", parallel: int = 1) -> MemoryPlan:
    """Walk every tunnel in order and report per-op and peak footprints.

    ``parallel`` > 1 is a what-if: it assumes that many tunnels share the
    arena at once and scales the transient peak accordingly.
    """
    if mode not in ("standard", "reordered"):
        raise ValueError(f"unknown mode {mode!r}")
    if parallel < 1:
        raise ValueError("parallel degree must be >= 1")
    eb = budget.elem_bytes
    per_op = []
    for i in range(len(net.tunnels)):
        for op_id, kind, elems in tunnel_footprints(net, i, mode):
            per_op.append(OpFootprint(op_id, i, kind, elems, elems * eb))
    # class scores are pushed above the accumulator once all tunnels are done
    per_op.append(OpFootprint("head.fc", -1, "fc", net.num_classes, net.num_classes * eb))
    resident = net.c_final
    tunnel_peak = max((op for op in per_op if op.tunnel >= 0), key=lambda op: op.elements)
    peak_op = tunnel_peak  # first maximum wins
    transient = parallel * tunnel_peak.elements
    if per_op[-1].elements > transient:
        peak_op, transient = per_op[-1], per_op[-1].elements
    peak = transient + resident
    if peak * eb > _MAX_COUNT:
        raise OverflowError(f"peak of {peak} elements overflows a 64-bit byte counter")
    return MemoryPlan(
        per_op=tuple(per_op),
        resident_elements=resident,
        peak_elements=peak,
        peak_bytes=peak * eb,
        peak_op=peak_op.op_id,
        budget_bytes=budget.budget_bytes,
        elem_bytes=eb,
        mode=mode,
        parallel=parallel,
    )
