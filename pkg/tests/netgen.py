"""Random executable networks for property tests."""

import numpy as np

from patchtunnel.bottleneck import BottleneckSpec
from patchtunnel.network import NetworkSpec, TunnelSpec
from patchtunnel.segmentation import PatchLayout
from patchtunnel.tensor import ConvParams, TensorShape


def random_tunnel(rng, c_in, c_final, max_blocks=4):
    stem = None
    c = c_in
    if rng.random() < 0.6:
        k = int(rng.choice([1, 3]))
        stem = ConvParams(k, k, int(rng.integers(1, 3)), k // 2, k // 2, c_in, int(rng.integers(1, 9)))
        c = stem.c_out
    blocks = []
    n_blocks = int(rng.integers(1, max_blocks + 1))
    for j in range(n_blocks):
        c_out = c_final if j == n_blocks - 1 else int(rng.integers(1, 9))
        stride = int(rng.choice([1, 2], p=[0.7, 0.3]))
        residual = stride == 1 and c_out == c and rng.random() < 0.7
        blocks.append(BottleneckSpec(c, int(rng.integers(1, 7)), c_out, stride, bool(residual), bool(rng.random() < 0.5)))
        c = c_out
    return TunnelSpec(stem, tuple(blocks))


def random_net(rng, max_side=64, max_c=8, max_blocks=4):
    """Up to 5 tunnels x ``max_blocks`` bottlenecks on inputs up to max_side^2 x max_c."""
    k = int(rng.choice([1, 4]))
    n = int(np.sqrt(k))
    cell = int(rng.integers(2, max_side // n + 1))
    h = n * cell
    w = n * int(rng.integers(2, max_side // n + 1))
    c = int(rng.integers(1, max_c + 1))
    layout = PatchLayout(k, int(rng.integers(0, cell + 1)) if n > 1 else 0,
                         int(rng.integers(0, w // n + 1)) if n > 1 else 0,
                         central=bool(rng.random() < 0.5) if k > 1 else False)
    c_final = int(rng.integers(1, 9))
    tunnels = tuple(random_tunnel(rng, c, c_final, max_blocks) for _ in range(layout.num_patches))
    return NetworkSpec(TensorShape(h, w, c), layout, tunnels, int(rng.integers(1, 11)))
