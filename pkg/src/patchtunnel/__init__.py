"""Patch-tunnel CNN inference under a fixed activation-memory budget.

Images are cut into overlapping patches, each patch runs through its own
tunnel of inverted-residual bottlenecks executed one expanded channel at a
time, and the pooled tunnel features are summed before a linear head.  A
static planner predicts the peak arena usage exactly.
"""

from .arena import Arena, ArenaOverflow
from .bottleneck import (
    BottleneckFootprint,
    BottleneckSpec,
    BottleneckWeights,
    bottleneck_footprint,
    bottleneck_reordered,
    bottleneck_standard,
)
from .modelio import (
    FormatError,
    dump_image_pnm,
    dump_spec,
    dump_weights,
    load_image_pnm,
    load_spec,
    load_weights,
)
from .network import NetworkSpec, NetworkWeights, TunnelSpec, TunnelWeights, random_weights, toy_network
from .planner import MemoryBudget, MemoryPlan, layer_footprint, max_cout_under_budget, plan_network
from .runtime import ExecutionTrace, execute_network, make_arena, run_tunnel, verify_equivalence
from .segmentation import PatchLayout, PatchRegion, extract_patches, patch_area_ratio, plan_regions
from .tensor import (
    ConvParams,
    TensorShape,
    channel_affine_relu6,
    conv2d,
    conv2d_naive,
    depthwise_conv,
    pointwise_conv,
)

__version__ = "0.1.0"
