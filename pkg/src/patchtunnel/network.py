"""Network descriptions: patch layout, per-patch tunnels, and the summing head."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bottleneck import BottleneckSpec, BottleneckWeights
from .segmentation import PatchLayout
from .tensor import ConvParams, ShapeError, TensorShape


@dataclass(frozen=True)
class TunnelSpec:
    """One patch tunnel: an optional dense stem conv, then bottlenecks."""

    stem: ConvParams | None
    blocks: tuple[BottleneckSpec, ...] = ()

    def ops(self) -> list[tuple[str, ConvParams | BottleneckSpec]]:
        ops = []
        if self.stem is not None:
            ops.append(("stem", self.stem))
        ops += [(f"b{i}", b) for i, b in enumerate(self.blocks)]
        return ops

    def shapes(self, in_shape: TensorShape) -> list[TensorShape]:
        """Activation shapes along the tunnel, input first."""
        shapes = [TensorShape(*in_shape)]
        for _, op in self.ops():
            shapes.append(op.output_shape(shapes[-1]))
        return shapes

    def num_weights(self) -> int:
        n = 0
        if self.stem is not None:
            s = self.stem
            n += s.k_h * s.k_w * s.c_in * s.c_out
        return n + sum(b.num_weights() for b in self.blocks)


@dataclass(frozen=True)
class NetworkSpec:
    input_shape: TensorShape
    layout: PatchLayout
    tunnels: tuple[TunnelSpec, ...]
    num_classes: int

    def __post_init__(self):
        object.__setattr__(self, "input_shape", TensorShape(*self.input_shape).validate())
        self.validate()

    @property
    def patch_shape(self) -> TensorShape:
        return self.layout.patch_shape(self.input_shape)

    @property
    def c_final(self) -> int:
        return self.tunnels[0].shapes(self.patch_shape)[-1].c

    def validate(self):
        if self.num_classes < 1:
            raise ShapeError("head needs at least one class")
        if len(self.tunnels) != self.layout.num_patches:
            raise ShapeError(
                f"layout yields {self.layout.num_patches} patches but {len(self.tunnels)} tunnels were given"
            )
        patch = self.patch_shape
        finals = set()
        for i, tun in enumerate(self.tunnels):
            if not tun.ops():
                raise ShapeError(f"tunnel {i} has no ops")
            try:
                finals.add(tun.shapes(patch)[-1].c)
            except ShapeError as exc:
                raise ShapeError(f"tunnel {i}: {exc}") from None
        if len(finals) != 1:
            raise ShapeError(f"tunnels end with different channel counts {sorted(finals)}")

    def num_weights(self) -> int:
        return sum(t.num_weights() for t in self.tunnels) + self.c_final * self.num_classes


@dataclass
class TunnelWeights:
    stem: np.ndarray | None  # [k_h][k_w][c_in][c_out]
    blocks: list[BottleneckWeights] = field(default_factory=list)


@dataclass
class NetworkWeights:
    tunnels: list[TunnelWeights]
    fc: np.ndarray  # [c_final][num_classes]

    def check(self, net: NetworkSpec) -> "NetworkWeights":
        if len(self.tunnels) != len(net.tunnels):
            raise ShapeError(f"{len(self.tunnels)} weight tunnels for {len(net.tunnels)} spec tunnels")
        for i, (tw, ts) in enumerate(zip(self.tunnels, net.tunnels)):
            if ts.stem is not None:
                s = ts.stem
                want = (s.k_h, s.k_w, s.c_in, s.c_out)
                if tw.stem is None or tw.stem.shape != want:
                    raise ShapeError(f"tunnel {i} stem weights {np.shape(tw.stem)}, expected {want}")
            elif tw.stem is not None:
                raise ShapeError(f"tunnel {i} has stem weights but no stem")
            if len(tw.blocks) != len(ts.blocks):
                raise ShapeError(f"tunnel {i}: {len(tw.blocks)} block weights for {len(ts.blocks)} blocks")
            for bw, bs in zip(tw.blocks, ts.blocks):
                bw.check(bs)
        if self.fc.shape != (net.c_final, net.num_classes):
            raise ShapeError(f"fc weights {self.fc.shape}, expected {(net.c_final, net.num_classes)}")
        return self


def random_weights(net: NetworkSpec, rng: np.random.Generator) -> NetworkWeights:
    """He-style scaled normal weights; affine scales near one."""
    tunnels = []
    for ts in net.tunnels:
        stem = None
        if ts.stem is not None:
            s = ts.stem
            stem = rng.standard_normal((s.k_h, s.k_w, s.c_in, s.c_out)) * np.sqrt(2.0 / (s.k_h * s.k_w * s.c_in))
        blocks = []
        for b in ts.blocks:
            n = b.hidden
            bw = BottleneckWeights(
                expand=rng.standard_normal((n, b.c_in)) * np.sqrt(2.0 / b.c_in),
                dw=rng.standard_normal((n, 3, 3)) * np.sqrt(2.0 / 9),
                reduce=rng.standard_normal((b.c_out, n)) * np.sqrt(1.0 / n),
            )
            if b.affine:
                bw.expand_scale = 1.0 + 0.1 * rng.standard_normal(n)
                bw.expand_bias = 0.1 * rng.standard_normal(n)
                bw.dw_scale = 1.0 + 0.1 * rng.standard_normal(n)
                bw.dw_bias = 0.1 * rng.standard_normal(n)
            blocks.append(bw)
        tunnels.append(TunnelWeights(stem, blocks))
    fc = rng.standard_normal((net.c_final, net.num_classes)) * np.sqrt(1.0 / net.c_final)
    return NetworkWeights(tunnels, fc)


def uniform_network(input_shape, layout: PatchLayout, stem: ConvParams | None,
                    blocks: list[BottleneckSpec], num_classes: int) -> NetworkSpec:
    """Every tunnel gets the same architecture (weights still differ per tunnel)."""
    tunnel = TunnelSpec(stem, tuple(blocks))
    return NetworkSpec(TensorShape(*input_shape), layout, (tunnel,) * layout.num_patches, num_classes)


def toy_network(margin: int = 4, central: bool = True, t: int = 6, image: int = 32,
                k: int = 4, num_classes: int = 10) -> NetworkSpec:
    """Small MobileNetV2-flavoured net used by the demos and the tests.

    Stem 3x3 conv to 8 channels, then a stride-1 residual block and a
    stride-2 widening block in each tunnel.
    """
    stem = ConvParams(3, 3, 1, 1, 1, 3, 8)
    blocks = [
        BottleneckSpec(8, t, 8, stride=1, residual=True, affine=True),
        BottleneckSpec(8, t, 16, stride=2, affine=True),
    ]
    return uniform_network((image, image, 3), PatchLayout(k, margin, margin, central), stem, blocks, num_classes)
