"""Cutting an image into overlapping patches.

Run with ``python3 demos/01_segmentation.py``.
"""
import numpy as np

from patchtunnel import PatchLayout, extract_patches, patch_area_ratio, plan_regions
from patchtunnel.segmentation import reassemble
from patchtunnel.tensor import TensorShape

# A 224x224 RGB image split into a 2x2 grid.  Each patch is a quarter of the
# side plus the margin, so neighbours share a band of 2m pixels.
image = np.random.default_rng(0).random((224, 224, 3))
shape = TensorShape(*image.shape)
layout = PatchLayout(k=4, m_h=18, m_w=18, central=True)

regions = plan_regions(shape, layout)
for r in regions:
    print(f"{r.name:8s} rows {r.row0:3d}..{r.row0 + r.height:3d}  cols {r.col0:3d}..{r.col0 + r.width:3d}")

# %% the overlap band is real pixel data shared by both patches
patches = extract_patches(image, regions)
left, right = patches[0], patches[1]
print("shared columns identical:", np.array_equal(left[:, -36:], right[:, :36]))

# %% each patch covers roughly a third of the image area
print(f"area per patch / image area = {patch_area_ratio(224, 4, 18):.6f}")

# %% the grid patches tile the image, so they can be stitched back
grid = [(p, r) for p, r in zip(patches, regions) if not r.is_central]
back = reassemble([p for p, _ in grid], [r for _, r in grid], shape)
print("reassembled equals original:", np.array_equal(back, image))

# %% margins that would push a patch past the border are refused
try:
    PatchLayout(4, 120, 120).patch_shape(shape)
except ValueError as err:
    print("rejected:", err)
