"""Dense h x w x c activations and reference convolution kernels.

Activations are plain ``numpy`` arrays of shape ``(h, w, c)`` (row-major,
channels innermost) holding float64 values.  The accounting element size
(fp32 vs int8) never touches arithmetic; it lives in the planner's
:class:`~patchtunnel.planner.MemoryBudget`.

``conv2d_naive`` is the correctness oracle: six nested Python loops and
nothing clever.  The other kernels are vectorized, but keep the oracle's
accumulation order (kernel row, kernel column, input channel) so they agree
with it bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class ShapeError(ValueError):
    """Raised on channel mismatches and empty convolution outputs."""


class TensorShape(NamedTuple):
    h: int
    w: int
    c: int

    @property
    def size(self) -> int:
        return self.h * self.w * self.c

    def validate(self) -> "TensorShape":
        if self.h < 1 or self.w < 1 or self.c < 1:
            raise ShapeError(f"tensor dims must be >= 1, got {tuple(self)}")
        return self


@dataclass(frozen=True)
class ConvParams:
    """Geometry of one dense convolution layer."""

    k_h: int
    k_w: int
    s: int
    p_h: int
    p_w: int
    c_in: int
    c_out: int

    def __post_init__(self):
        if min(self.k_h, self.k_w, self.s, self.c_in, self.c_out) < 1:
            raise ShapeError(f"kernel, stride and channel counts must be >= 1: {self}")
        if self.p_h < 0 or self.p_w < 0:
            raise ShapeError(f"padding must be >= 0: {self}")

    def output_shape(self, in_shape: TensorShape) -> TensorShape:
        if in_shape.c != self.c_in:
            raise ShapeError(f"input has {in_shape.c} channels, conv expects {self.c_in}")
        return TensorShape(
            conv_output_dim(in_shape.h, self.k_h, self.s, self.p_h),
            conv_output_dim(in_shape.w, self.k_w, self.s, self.p_w),
            self.c_out,
        )


def conv_output_dim(d: int, k: int, s: int, p: int) -> int:
    """floor((d + 2p - k) / s) + 1, rejecting non-positive results."""
    n = (d + 2 * p - k) // s + 1
    if n < 1:
        raise ShapeError(f"non-positive output dim for d={d}, k={k}, s={s}, p={p}")
    return n


def shape_of(x: np.ndarray) -> TensorShape:
    if x.ndim != 3:
        raise ShapeError(f"expected a rank-3 (h, w, c) array, got shape {x.shape}")
    return TensorShape(*x.shape).validate()


def as_tensor(x) -> np.ndarray:
    """Coerce to a finite float64 (h, w, c) array."""
    x = np.asarray(x, dtype=np.float64)
    shape_of(x)
    if not np.all(np.isfinite(x)):
        raise ValueError("tensor contains non-finite values")
    return x


def conv2d_naive(x, kernel, params: ConvParams) -> np.ndarray:
    """Direct convolution, one multiply-add at a time.

    ``kernel`` is indexed ``[k_h][k_w][c_in][c_out]``; padding is zero-fill.
    Slow on purpose.  Use it as an oracle on small inputs only.
    """
    x = as_tensor(x)
    kernel = np.asarray(kernel, dtype=np.float64)
    if kernel.shape != (params.k_h, params.k_w, params.c_in, params.c_out):
        raise ShapeError(f"kernel shape {kernel.shape} does not match {params}")
    h, w, _ = x.shape
    out_shape = params.output_shape(shape_of(x))
    xl = x.tolist()
    kl = kernel.tolist()
    out = [[[0.0] * out_shape.c for _ in range(out_shape.w)] for _ in range(out_shape.h)]
    for oy in range(out_shape.h):
        for ox in range(out_shape.w):
            for co in range(params.c_out):
                acc = 0.0
                for ky in range(params.k_h):
                    iy = oy * params.s + ky - params.p_h
                    for kx in range(params.k_w):
                        ix = ox * params.s + kx - params.p_w
                        for ci in range(params.c_in):
                            if 0 <= iy < h and 0 <= ix < w:
                                v = xl[iy][ix][ci]
                            else:
                                v = 0.0
                            acc += v * kl[ky][kx][ci][co]
                out[oy][ox][co] = acc
    return np.array(out, dtype=np.float64)


def _padded(x: np.ndarray, p_h: int, p_w: int) -> np.ndarray:
    if p_h == 0 and p_w == 0:
        return x
    return np.pad(x, ((p_h, p_h), (p_w, p_w), (0, 0)))


def conv2d(x, kernel, params: ConvParams, out: np.ndarray | None = None) -> np.ndarray:
    """Vectorized dense convolution with the oracle's accumulation order.

    Each tap is applied as a whole-plane multiply-add, so results match
    :func:`conv2d_naive` exactly.  ``out`` may be a preallocated buffer
    (for instance an arena block); it is overwritten.
    """
    x = np.asarray(x, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    if kernel.shape != (params.k_h, params.k_w, params.c_in, params.c_out):
        raise ShapeError(f"kernel shape {kernel.shape} does not match {params}")
    oh, ow, oc = params.output_shape(shape_of(x))
    if out is None:
        out = np.zeros((oh, ow, oc))
    else:
        if out.shape != (oh, ow, oc):
            raise ShapeError(f"out buffer {out.shape} != {(oh, ow, oc)}")
        out[...] = 0.0
    xp = _padded(x, params.p_h, params.p_w)
    s = params.s
    for ky in range(params.k_h):
        for kx in range(params.k_w):
            window = xp[ky : ky + s * (oh - 1) + 1 : s, kx : kx + s * (ow - 1) + 1 : s, :]
            for ci in range(params.c_in):
                out += window[:, :, ci, None] * kernel[ky, kx, ci]
    return out


def pointwise_conv(x, kernel, out: np.ndarray | None = None) -> np.ndarray:
    """1x1 convolution with ``kernel[c_in][c_out]``.

    Accumulates input channels in index order, which makes the result
    identical to ``conv2d_naive`` with a 1x1 kernel.
    """
    x = np.asarray(x, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    h, w, c = shape_of(x)
    if kernel.ndim != 2 or kernel.shape[0] != c:
        raise ShapeError(f"pointwise kernel {kernel.shape} does not take {c} input channels")
    if out is None:
        out = np.zeros((h, w, kernel.shape[1]))
    else:
        out[...] = 0.0
    for ci in range(c):
        out += x[:, :, ci, None] * kernel[ci]
    return out


def depthwise_conv(x, kernel, s: int = 1, p_h: int = 0, p_w: int = 0,
                   out: np.ndarray | None = None) -> np.ndarray:
    """Per-channel spatial convolution; ``kernel`` is ``[c][k_h][k_w]``."""
    x = np.asarray(x, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    h, w, c = shape_of(x)
    if kernel.ndim != 3 or kernel.shape[0] != c:
        raise ShapeError(f"depthwise kernel {kernel.shape} does not match {c} channels")
    if s < 1:
        raise ShapeError(f"stride must be >= 1, got {s}")
    _, k_h, k_w = kernel.shape
    oh = conv_output_dim(h, k_h, s, p_h)
    ow = conv_output_dim(w, k_w, s, p_w)
    if out is None:
        out = np.zeros((oh, ow, c))
    else:
        if out.shape != (oh, ow, c):
            raise ShapeError(f"out buffer {out.shape} != {(oh, ow, c)}")
        out[...] = 0.0
    xp = _padded(x, p_h, p_w)
    taps = np.ascontiguousarray(kernel.transpose(1, 2, 0))  # [k_h][k_w][c]
    for ky in range(k_h):
        for kx in range(k_w):
            out += xp[ky : ky + s * (oh - 1) + 1 : s, kx : kx + s * (ow - 1) + 1 : s, :] * taps[ky, kx]
    return out


def channel_affine_relu6(x, scale, bias, apply_relu6: bool, out: np.ndarray | None = None) -> np.ndarray:
    """``scale[c] * x + bias[c]``, then clamp to [0, 6] if ``apply_relu6``.

    Stands in for a folded batch-norm followed by ReLU6.  May run in place
    by passing ``out=x``.
    """
    x = np.asarray(x, dtype=np.float64)
    c = shape_of(x).c
    scale = np.asarray(scale, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    if scale.shape != (c,) or bias.shape != (c,):
        raise ShapeError(f"scale/bias must have length {c}, got {scale.shape} and {bias.shape}")
    if out is None:
        out = np.empty_like(x)
    np.multiply(x, scale, out=out)
    out += bias
    if apply_relu6:
        np.clip(out, 0.0, 6.0, out=out)
    return out
