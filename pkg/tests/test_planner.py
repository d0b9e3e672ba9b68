import json

import pytest

from patchtunnel.bottleneck import BottleneckSpec
from patchtunnel.network import toy_network, uniform_network
from patchtunnel.planner import (
    BudgetError,
    MemoryBudget,
    layer_footprint,
    max_cout_under_budget,
    plan_network,
)
from patchtunnel.segmentation import PatchLayout
from patchtunnel.tensor import ConvParams, ShapeError, TensorShape


def single_block_net(t=6, head_classes=3):
    return uniform_network((8, 8, 4), PatchLayout(1), None, [BottleneckSpec(4, t, 4, residual=True)], head_classes)


class TestLayerFootprint:
    def test_worked_example(self):
        n = layer_footprint(TensorShape(130, 130, 3), ConvParams(3, 3, 1, 0, 0, 3, 3))
        assert n == 50_700 + 49_152 == 99_852
        assert n * 1 <= 256 * 1024
        assert n * 4 > 256 * 1024

    def test_minimal(self):
        assert layer_footprint(TensorShape(1, 1, 1), ConvParams(1, 1, 1, 0, 0, 1, 1)) == 2

    def test_pointwise(self):
        assert layer_footprint(TensorShape(8, 8, 4), ConvParams(1, 1, 1, 0, 0, 4, 24)) == 1792

    def test_nonpositive_output(self):
        with pytest.raises(ShapeError):
            layer_footprint(TensorShape(2, 2, 1), ConvParams(3, 3, 1, 0, 0, 1, 1))


class TestMaxCout:
    def test_closed_form(self):
        c = max_cout_under_budget(TensorShape(130, 130, 3), 3, 3, 1, 0, 0, MemoryBudget(262_144, 1))
        assert c == (262_144 - 50_700) // 16_384 == 12

    def test_boundary_one_channel(self):
        shape = TensorShape(10, 10, 2)
        budget = MemoryBudget(200 + 64, 1)  # input + one 8x8 output channel
        assert max_cout_under_budget(shape, 3, 3, 1, 0, 0, budget) == 1

    def test_infeasible(self):
        with pytest.raises(BudgetError):
            max_cout_under_budget(TensorShape(10, 10, 2), 3, 3, 1, 0, 0, MemoryBudget(150, 1))

    @pytest.mark.parametrize("h, c, k, s, p, budget, eb", [
        (32, 3, 3, 1, 1, 50_000, 4), (17, 5, 5, 2, 2, 9_999, 1), (64, 8, 1, 1, 0, 1 << 18, 2),
    ])
    def test_tight(self, h, c, k, s, p, budget, eb):
        shape = TensorShape(h, h, c)
        b = MemoryBudget(budget, eb)
        c_out = max_cout_under_budget(shape, k, k, s, p, p, b)
        fp = lambda co: layer_footprint(shape, ConvParams(k, k, s, p, p, c, co))
        assert fp(c_out) <= b.budget_elems < fp(c_out + 1)


class TestPlanNetwork:
    def test_single_bottleneck_peak(self):
        net = uniform_network((8, 8, 4), PatchLayout(1), None, [BottleneckSpec(4, 6, 4, residual=True)], 3)
        plan = plan_network(net, MemoryBudget(10_000, 1))
        assert net.c_final == 4
        assert plan.peak_elements == 640 + 4 and plan.peak_op == "t0.b0"

    def test_invariant_in_t(self):
        peaks = {t: plan_network(single_block_net(t), MemoryBudget(10_000, 4)).peak_bytes for t in (2, 8)}
        assert peaks[2] == peaks[8]

    def test_bytes_scale_with_elem_bytes(self):
        net = toy_network()
        p4 = plan_network(net, MemoryBudget(1 << 20, 4))
        p1 = plan_network(net, MemoryBudget(1 << 20, 1))
        assert p4.peak_bytes == 4 * p1.peak_bytes
        assert p4.peak_elements == p1.peak_elements

    def test_verdict_boundary(self):
        net = toy_network()
        peak = plan_network(net, MemoryBudget(1 << 20, 4)).peak_bytes
        assert plan_network(net, MemoryBudget(peak, 4)).within_budget
        assert not plan_network(net, MemoryBudget(peak - 1, 4)).within_budget

    def test_reordered_below_standard(self):
        net = toy_network(t=6)
        b = MemoryBudget(1 << 20, 4)
        assert plan_network(net, b, "reordered").peak_bytes < plan_network(net, b, "standard").peak_bytes

    def test_per_op_order_and_ids(self):
        net = toy_network(central=False)
        plan = plan_network(net, MemoryBudget(1 << 20, 4))
        ids = [op.op_id for op in plan.per_op]
        assert ids[:4] == ["t0.stem", "t0.b0", "t0.b1", "t0.pool"]
        assert ids[-1] == "head.fc" and len(ids) == 4 * 4 + 1

    def test_parallel_what_if(self):
        net = toy_network()
        b = MemoryBudget(1 << 20, 4)
        seq, par = plan_network(net, b), plan_network(net, b, parallel=3)
        assert par.peak_elements - par.resident_elements == 3 * (seq.peak_elements - seq.resident_elements)

    def test_head_can_dominate(self):
        net = uniform_network((2, 2, 1), PatchLayout(1), ConvParams(1, 1, 1, 0, 0, 1, 1), [], 50)
        plan = plan_network(net, MemoryBudget(1 << 20, 1))
        assert plan.peak_op == "head.fc" and plan.peak_elements == 50 + 1

    def test_deterministic_json(self):
        net = toy_network()
        b = MemoryBudget(40_000, 4)
        a, c = plan_network(net, b).to_json(), plan_network(net, b).to_json()
        assert a == c
        doc = json.loads(a)
        assert doc["within_budget"] is True and doc["peak_bytes"] == plan_network(net, b).peak_bytes

    def test_margin_monotone(self):
        peaks = [plan_network(toy_network(margin=m, image=224, t=6), MemoryBudget(1 << 24, 4)).peak_bytes
                 for m in (0, 5, 10, 18)]
        assert peaks == sorted(peaks)

    @pytest.mark.parametrize("kw", [dict(budget_bytes=0), dict(budget_bytes=10, elem_bytes=8)])
    def test_invalid_budget(self, kw):
        with pytest.raises(ValueError):
            MemoryBudget(**kw)

    def test_invalid_mode(self):
        with pytest.raises(ValueError):
            plan_network(toy_network(), MemoryBudget(100), mode="fused")


def test_text_report_mentions_accounting():
    text = plan_network(toy_network(), MemoryBudget(10, 4)).to_text()
    assert "OVER BUDGET" in text and "weights excluded" in text and "KB" in text
