"""Inverted-residual bottleneck, executed layer-at-a-time or channel-at-a-time.

Both modes compute expand (1x1) -> depth-wise 3x3 (pad 1) -> reduce (1x1),
with optional per-channel affine + ReLU6 after the first two stages and an
optional identity skip.  The reduction stage is always linear, which is
what lets the reordered schedule push one expanded channel at a time all
the way through and sum its contribution into the output.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .arena import Arena, Block
from .tensor import ShapeError, TensorShape, conv_output_dim, depthwise_conv, shape_of

DW_KERNEL = 3
DW_PAD = 1


@dataclass(frozen=True)
class BottleneckSpec:
    c_in: int
    t: int
    c_out: int
    stride: int = 1
    residual: bool = False
    affine: bool = False

    def __post_init__(self):
        if self.c_in < 1 or self.c_out < 1:
            raise ShapeError(f"channel counts must be >= 1: {self}")
        if self.t < 1:
            raise ShapeError(f"expansion ratio must be >= 1, got {self.t}")
        if self.stride not in (1, 2):
            raise ShapeError(f"depth-wise stride must be 1 or 2, got {self.stride}")

    @property
    def hidden(self) -> int:
        return self.t * self.c_in

    def output_shape(self, in_shape: TensorShape) -> TensorShape:
        """Block output shape; also enforces the residual shape rule."""
        if in_shape.c != self.c_in:
            raise ShapeError(f"bottleneck expects {self.c_in} input channels, got {in_shape.c}")
        ho = conv_output_dim(in_shape.h, DW_KERNEL, self.stride, DW_PAD)
        wo = conv_output_dim(in_shape.w, DW_KERNEL, self.stride, DW_PAD)
        out = TensorShape(ho, wo, self.c_out)
        if self.residual and out != in_shape:
            raise ShapeError(
                f"residual needs matching shapes, but {tuple(in_shape)} -> {tuple(out)} "
                f"(stride {self.stride}, c_out {self.c_out})"
            )
        return out

    def num_weights(self) -> int:
        n = self.hidden * self.c_in + self.hidden * DW_KERNEL * DW_KERNEL + self.c_out * self.hidden
        if self.affine:
            n += 4 * self.hidden
        return n


@dataclass
class BottleneckWeights:
    expand: np.ndarray  # [hidden][c_in]
    dw: np.ndarray  # [hidden][3][3]
    reduce: np.ndarray  # [c_out][hidden]
    expand_scale: np.ndarray | None = None
    expand_bias: np.ndarray | None = None
    dw_scale: np.ndarray | None = None
    dw_bias: np.ndarray | None = None

    def check(self, spec: BottleneckSpec):
        n = spec.hidden
        want = {
            "expand": (n, spec.c_in),
            "dw": (n, DW_KERNEL, DW_KERNEL),
            "reduce": (spec.c_out, n),
        }
        if spec.affine:
            want.update(expand_scale=(n,), expand_bias=(n,), dw_scale=(n,), dw_bias=(n,))
        for name, shape in want.items():
            arr = getattr(self, name)
            if arr is None or np.shape(arr) != shape:
                raise ShapeError(f"bottleneck weight {name} has shape {np.shape(arr)}, expected {shape}")
        return self

    def arrays(self, spec: BottleneckSpec) -> list[np.ndarray]:
        """Weight arrays in file order."""
        arrs = [self.expand, self.dw, self.reduce]
        if spec.affine:
            arrs += [self.expand_scale, self.expand_bias, self.dw_scale, self.dw_bias]
        return arrs

    @classmethod
    def random(cls, spec: BottleneckSpec, rng: np.random.Generator, scale: float = 1.0) -> "BottleneckWeights":
        n = spec.hidden
        w = cls(
            expand=rng.standard_normal((n, spec.c_in)) * scale,
            dw=rng.standard_normal((n, DW_KERNEL, DW_KERNEL)) * scale,
            reduce=rng.standard_normal((spec.c_out, n)) * scale,
        )
        if spec.affine:
            w.expand_scale = rng.standard_normal(n)
            w.expand_bias = rng.standard_normal(n)
            w.dw_scale = rng.standard_normal(n)
            w.dw_bias = rng.standard_normal(n)
        return w

    @classmethod
    def zeros(cls, spec: BottleneckSpec) -> "BottleneckWeights":
        n = spec.hidden
        w = cls(np.zeros((n, spec.c_in)), np.zeros((n, DW_KERNEL, DW_KERNEL)), np.zeros((spec.c_out, n)))
        if spec.affine:
            w.expand_scale, w.expand_bias, w.dw_scale, w.dw_bias = (np.zeros(n) for _ in range(4))
        return w


def _affine_relu6(y: np.ndarray, scale, bias) -> None:
    y *= scale
    y += bias
    np.clip(y, 0.0, 6.0, out=y)


def bottleneck_standard(x, spec: BottleneckSpec, w: BottleneckWeights) -> np.ndarray:
    """Conventional execution: each stage over all channels, via matrix products."""
    x = np.asarray(x, dtype=np.float64)
    in_shape = shape_of(x)
    out_shape = spec.output_shape(in_shape)
    w.check(spec)
    h, wd, c = in_shape
    y1 = (x.reshape(-1, c) @ w.expand.T).reshape(h, wd, spec.hidden)
    if spec.affine:
        _affine_relu6(y1, w.expand_scale, w.expand_bias)
    y2 = depthwise_conv(y1, w.dw, spec.stride, DW_PAD, DW_PAD)
    if spec.affine:
        _affine_relu6(y2, w.dw_scale, w.dw_bias)
    y = (y2.reshape(-1, spec.hidden) @ w.reduce.T).reshape(out_shape)
    if spec.residual:
        y += x
    return y


def _reordered_into(x: np.ndarray, y: np.ndarray, spec: BottleneckSpec, w: BottleneckWeights, arena: Arena):
    """Channel-at-a-time schedule writing into ``y`` (zero-filled here).

    Per expanded channel n: a one-plane expand output and a one-plane
    depth-wise output are pushed on the arena, the reduce contribution is
    accumulated into ``y``, then both planes are popped.
    """
    h, wd, c_in = x.shape
    ho, wo, _ = y.shape
    y[...] = 0.0
    dw_kernels = w.dw.reshape(spec.hidden, 1, DW_KERNEL, DW_KERNEL)
    for n in range(spec.hidden):
        pw_blk = arena.alloc((h, wd, 1), tag=f"expand[{n}]")
        plane = pw_blk.array
        plane[...] = 0.0
        for ci in range(c_in):
            plane += x[:, :, ci, None] * w.expand[n, ci]
        if spec.affine:
            _affine_relu6(plane, w.expand_scale[n], w.expand_bias[n])
        dw_blk = arena.alloc((ho, wo, 1), tag=f"dw[{n}]")
        depthwise_conv(plane, dw_kernels[n], spec.stride, DW_PAD, DW_PAD, out=dw_blk.array)
        if spec.affine:
            _affine_relu6(dw_blk.array, w.dw_scale[n], w.dw_bias[n])
        y += dw_blk.array * w.reduce[:, n]
        arena.free(dw_blk)
        arena.free(pw_blk)
    if spec.residual:
        y += x


def bottleneck_reordered_block(x_blk: Block, spec: BottleneckSpec, w: BottleneckWeights, arena: Arena) -> Block:
    """Run on an arena-resident input; returns the output block pushed above it."""
    out_shape = spec.output_shape(TensorShape(*x_blk.shape))
    w.check(spec)
    y_blk = arena.alloc(tuple(out_shape), tag="bottleneck_out")
    _reordered_into(x_blk.array, y_blk.array, spec, w, arena)
    return y_blk


def bottleneck_reordered(x, spec: BottleneckSpec, w: BottleneckWeights, scratch: Arena) -> np.ndarray:
    """Channel-at-a-time execution inside ``scratch``.

    The input is staged into the arena, the output is allocated above it,
    and the two single-channel intermediates cycle on top.  The arena's
    high-water mark therefore equals the reordered footprint.  On return the
    arena is back at its entry cursor.
    """
    x = np.asarray(x, dtype=np.float64)
    spec.output_shape(shape_of(x))
    w.check(spec)
    depth = len(scratch.live_blocks)
    try:
        x_blk = scratch.stage(x, tag="bottleneck_in")
        y_blk = bottleneck_reordered_block(x_blk, spec, w, scratch)
    except Exception:
        scratch.unwind(depth)
        raise
    result = y_blk.array.copy()
    scratch.free(y_blk)
    scratch.free(x_blk)
    return result


@dataclass(frozen=True)
class BottleneckFootprint:
    """Live activation elements while one bottleneck runs."""

    h_i: int
    w_i: int
    c_i: int
    h_p: int
    w_p: int
    c_p: int
    h_d: int
    w_d: int
    c_d: int
    h_o: int
    w_o: int
    c_o: int
    mode: str = "reordered"
    total_elements: int = field(init=False)

    def __post_init__(self):
        inp = self.h_i * self.w_i * self.c_i
        pw = self.h_p * self.w_p * self.c_p
        dw = self.h_d * self.w_d * self.c_d
        out = self.h_o * self.w_o * self.c_o
        if self.mode == "reordered":
            total = inp + pw + dw + out
        else:
            total = max(inp + pw, pw + dw, dw + out)
        object.__setattr__(self, "total_elements", total)


def bottleneck_footprint(spec: BottleneckSpec, in_shape: TensorShape, mode: str = "reordered") -> BottleneckFootprint:
    """Activation footprint in elements.

    ``reordered``: input + one expand plane + one depth-wise plane + output,
    independent of ``t``.  ``standard``: the largest (stage input + stage
    output) over the three stages, each carrying ``t * c_in`` channels.
    """
    if mode not in ("standard", "reordered"):
        raise ValueError(f"unknown mode {mode!r}")
    in_shape = TensorShape(*in_shape).validate()
    out = spec.output_shape(in_shape)
    width = 1 if mode == "reordered" else spec.hidden
    return BottleneckFootprint(
        in_shape.h, in_shape.w, in_shape.c,
        in_shape.h, in_shape.w, width,
        out.h, out.w, width,
        out.h, out.w, out.c,
        mode=mode,
    )
