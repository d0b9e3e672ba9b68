"""Static peak-memory planning before anything runs.

Run with ``python3 demos/03_memory_planning.py``.
"""
from patchtunnel import ConvParams, MemoryBudget, TensorShape, layer_footprint, max_cout_under_budget, plan_network
from patchtunnel.network import toy_network

# %% a single convolution: input plus output must fit in SRAM
shape = TensorShape(130, 130, 3)
n = layer_footprint(shape, ConvParams(3, 3, 1, 0, 0, 3, 3))
print(f"3x3 conv on 130x130x3 -> {n} elements")
for eb in (1, 4):
    print(f"  {eb} byte(s)/element: {n * eb} bytes, fits 256 KB: {n * eb <= 256 * 1024}")
c_max = max_cout_under_budget(shape, 3, 3, 1, 0, 0, MemoryBudget(256 * 1024, 1))
print(f"widest 3x3 conv that fits at 1 byte/element: c_out = {c_max}")

# %% a whole network: per-op footprints and the peak
net = toy_network()
plan = plan_network(net, MemoryBudget(32 * 1024, 4))
print(plan.to_text())

# %% the same net in standard order blows the budget
std = plan_network(net, MemoryBudget(32 * 1024, 4), mode="standard")
print(f"standard order peak {std.peak_bytes} bytes, within budget: {std.within_budget}")

# %% running tunnels side by side multiplies the transient part
for par in (1, 2, 5):
    p = plan_network(net, MemoryBudget(32 * 1024, 4), parallel=par)
    print(f"parallel={par}: peak {p.peak_bytes} bytes")

# %% bigger margins mean bigger patches and a higher peak
for m in (0, 5, 10, 18):
    p = plan_network(toy_network(margin=m, image=224), MemoryBudget(1 << 24, 1))
    print(f"margin {m:2d}: peak {p.peak_bytes / 1024:.1f} KB at 1 byte/element")
