"""Split an image into overlapping grid patches plus an optional central patch.

Every patch has the same extent ``(h/n + m_h) x (w/n + m_w)`` where
``n = sqrt(k)``.  Grid patch ``(r, c)`` owns one ``h/n x w/n`` cell and is
grown by the margin toward the image interior, so patches never leave the
image and need no padding.

For a 2x2 grid this puts the second row/column at ``h/2 - m_h`` and two
neighbours share a band of exactly ``2 m`` pixels.  For larger grids a
constant ``2 m`` band cannot coexist with a fixed patch size and full
coverage, so start offsets are spread evenly between ``0`` and
``h - patch_h`` instead; every pixel is still covered and neighbours still
overlap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .tensor import TensorShape, shape_of


class LayoutError(ValueError):
    pass


@dataclass(frozen=True)
class PatchLayout:
    k: int
    m_h: int = 0
    m_w: int = 0
    central: bool = False

    def __post_init__(self):
        if self.k < 1 or math.isqrt(self.k) ** 2 != self.k:
            raise LayoutError(f"k={self.k} is not a perfect square >= 1")
        if self.m_h < 0 or self.m_w < 0:
            raise LayoutError("margins must be >= 0")

    @property
    def grid(self) -> int:
        return math.isqrt(self.k)

    @property
    def num_patches(self) -> int:
        return self.k + int(self.central)

    def patch_shape(self, image_shape: TensorShape) -> TensorShape:
        """Patch extent for ``image_shape``, checking divisibility and fit."""
        h, w, c = image_shape
        n = self.grid
        if h % n or w % n:
            raise LayoutError(f"image {h}x{w} is not divisible by sqrt(k)={n}")
        ph, pw = h // n + self.m_h, w // n + self.m_w
        if ph > h or pw > w:
            raise LayoutError(f"margin too large: patch {ph}x{pw} exceeds image {h}x{w}")
        return TensorShape(ph, pw, c)


@dataclass(frozen=True)
class PatchRegion:
    row0: int
    col0: int
    height: int
    width: int
    is_central: bool = False
    grid_pos: tuple[int, int] | None = None

    @property
    def name(self) -> str:
        if self.is_central:
            return "central"
        r, c = self.grid_pos
        return f"r{r}_c{c}"


def _grid_starts(extent: int, patch: int, n: int) -> list[int]:
    if n == 1:
        return [0]
    return [i * (extent - patch) // (n - 1) for i in range(n)]


def plan_regions(image_shape: TensorShape, layout: PatchLayout) -> list[PatchRegion]:
    """Patch rectangles in row-major grid order, central patch last."""
    image_shape = TensorShape(*image_shape).validate()
    ph, pw, _ = layout.patch_shape(image_shape)
    h, w = image_shape.h, image_shape.w
    n = layout.grid
    rows = _grid_starts(h, ph, n)
    cols = _grid_starts(w, pw, n)
    regions = [
        PatchRegion(r0, c0, ph, pw, grid_pos=(r, c))
        for r, r0 in enumerate(rows)
        for c, c0 in enumerate(cols)
    ]
    if layout.central:
        regions.append(PatchRegion((h - ph) // 2, (w - pw) // 2, ph, pw, is_central=True))
    return regions


def extract_patches(image, regions: list[PatchRegion]) -> list[np.ndarray]:
    """Copy each region (all channels) out of ``image``."""
    image = np.asarray(image)
    h, w, _ = shape_of(image)
    patches = []
    for reg in regions:
        if reg.row0 < 0 or reg.col0 < 0 or reg.row0 + reg.height > h or reg.col0 + reg.width > w:
            raise LayoutError(f"region {reg} falls outside the {h}x{w} image")
        patches.append(image[reg.row0 : reg.row0 + reg.height, reg.col0 : reg.col0 + reg.width].copy())
    return patches


def reassemble(patches: list[np.ndarray], regions: list[PatchRegion], image_shape: TensorShape) -> np.ndarray:
    """Paste grid patches back into an image; overlap bands are written twice."""
    out = np.zeros(tuple(image_shape))
    for patch, reg in zip(patches, regions):
        if reg.is_central:
            continue
        out[reg.row0 : reg.row0 + reg.height, reg.col0 : reg.col0 + reg.width] = patch
    return out


def patch_area_ratio(h: float, k: int, m_h: float) -> float:
    """Patch-to-image area ratio for a square image with equal margins.

    ``1/k + 2 m / (h sqrt k) + m^2 / h^2``, i.e. ``(h/sqrt(k) + m)^2 / h^2``.
    """
    if h <= 0:
        raise ValueError(f"image side must be positive, got {h}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return 1.0 / k + 2.0 * m_h / (h * math.sqrt(k)) + (m_h * m_h) / (h * h)
