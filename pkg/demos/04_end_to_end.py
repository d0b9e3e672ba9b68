"""Save a model, load it back and run it inside a fixed arena.

Run with ``python3 demos/04_end_to_end.py``.  Files go to a temp directory.
"""
import tempfile
from pathlib import Path

import numpy as np

from patchtunnel import (
    MemoryBudget,
    dump_image_pnm,
    dump_spec,
    dump_weights,
    execute_network,
    load_image_pnm,
    load_spec,
    load_weights,
    plan_network,
    random_weights,
    toy_network,
)

out = Path(tempfile.mkdtemp(prefix="patchtunnel-"))
rng = np.random.default_rng(11)
net = toy_network()
weights = random_weights(net, rng)

(out / "model.json").write_bytes(dump_spec(net))
(out / "weights.ptnw").write_bytes(dump_weights(weights, net))
(out / "image.ppm").write_bytes(dump_image_pnm(rng.random((32, 32, 3))))
print("wrote", sorted(p.name for p in out.iterdir()), "to", out)

# %% everything reloads bit-for-bit
net2 = load_spec((out / "model.json").read_bytes())
w2 = load_weights((out / "weights.ptnw").read_bytes(), net2)
img = load_image_pnm((out / "image.ppm").read_bytes())
print("spec identical:", net2 == net)

# %% the arena gets exactly the planned peak and not a byte more
budget = MemoryBudget(plan_network(net2, MemoryBudget(1 << 20, 4)).peak_bytes, 4)
scores, trace = execute_network(net2, w2, img, budget)
print(trace.summary())
print("scores:", np.array2string(scores, precision=4))

# %% per-op high water, as recorded by the arena
for rec in trace.op_records()[:6]:
    print(rec)

# %% one byte less and the plan check refuses to start
try:
    execute_network(net2, w2, img, MemoryBudget(budget.budget_bytes - 1, 4))
except RuntimeError as err:
    print("refused:", err)

# The same flow from a shell:
#   patchtunnel plan --model model.json --budget 32768
#   patchtunnel run --model model.json --weights weights.ptnw --image image.ppm --budget 32768
