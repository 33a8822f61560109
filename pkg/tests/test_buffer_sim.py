import json

import pytest

from helpers import random_layers
from wdeconv import InfeasiblePlanError, LayerConfig, load_preset, reuse_stats, simulate_layer
from wdeconv.buffer_sim import BufferPlan
from wdeconv.cost_model import CostModelInputs, processing_time, stall_free_bandwidth

L1 = load_preset("dcgan").layers[1]
FREQ = 1e8


def test_plan_capacities():
    plan = BufferPlan(L1, 4, 128)
    assert (plan.input_lines, plan.output_lines) == (6, 8)
    assert plan.input_capacity == 6 * 8 * 128
    assert plan.output_capacity == 8 * 16 * 4


def test_reuse_stats():
    layer = LayerConfig.upsampling(1, 1, 8, 8, 5)
    r = reuse_stats(layer)
    assert r["overlap_elements_per_tile_pair"] == 32
    assert r["tiles"] == 16 and r["tile_pairs"] == 24
    assert r["reused_accesses"] == 24 * 32 and r["naive_accesses"] == 16 * 64
    assert reuse_stats(LayerConfig.upsampling(1, 1, 8, 8, 3, 1))["overlap_elements_per_tile_pair"] == 8


@pytest.mark.parametrize("layer", list(load_preset("dcgan").layers) + random_layers(10, seed=3))
def test_exact_threshold_is_iff(layer):
    tm, tn = min(4, layer.stride ** 2 * layer.M), min(8, layer.N)
    bw = stall_free_bandwidth(CostModelInputs(layer, tm, tn, FREQ, 1.0))
    assert simulate_layer(layer, tm, tn, bw, FREQ).total_stall == 0
    assert simulate_layer(layer, tm, tn, bw * (1 - 1e-9), FREQ).total_stall > 0


def test_makespan_with_and_without_stalls():
    p = CostModelInputs(L1, 4, 128, FREQ, 1.0)
    fast = simulate_layer(L1, 4, 128, 10 * stall_free_bandwidth(p), FREQ)
    assert fast.makespan == pytest.approx(processing_time(p.with_(bandwidth=10 * stall_free_bandwidth(p))),
                                          rel=1e-12)
    slow_bw = stall_free_bandwidth(p) / 2
    slow = simulate_layer(L1, 4, 128, slow_bw, FREQ)
    groups = len(slow.compute_time)
    assert slow.total_stall == pytest.approx(groups * slow.compute_time[0])
    assert slow.makespan == pytest.approx(slow.initial_time + slow.total_transfer)


def test_budget_enforced():
    need = BufferPlan(L1, 4, 128).total_capacity
    simulate_layer(L1, 4, 128, 1e9, FREQ, onchip_budget=need)
    with pytest.raises(InfeasiblePlanError, match="budget"):
        simulate_layer(L1, 4, 128, 1e9, FREQ, onchip_budget=need - 1)


def test_exports():
    trace = simulate_layer(L1, 4, 128, 1e9, FREQ)
    doc = json.loads(trace.to_json())
    assert len(doc["row_groups"]) == 4 and doc["plan"]["T_m"] == 4
    lines = trace.to_csv().splitlines()
    assert lines[0] == "row_group,compute,transfer,stall" and len(lines) == 5


def test_fetches_each_input_row_once():
    trace = simulate_layer(L1, 4, 128, 1e9, FREQ)
    assert trace.fetched_elements == L1.h_in * L1.w_in * L1.N
