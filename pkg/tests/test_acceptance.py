"""Acceptance criteria 1-10.

Each test records one PASS/FAIL line (also echoed in the terminal summary) and
then asserts.  Run standalone with ``python3 tests/test_acceptance.py``.
"""

import json
import time
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from helpers import exhaustive_small_layers, random_layers, rel_err
from wdeconv import (PRESETS, LayerConfig, build_filter_set, classify_sparsity, inverse_transform,
                     live_mults_per_block, load_preset, random_layer_data, reuse_stats,
                     simulate_layer, sparse_inverse_transform, standard_deconv, tdc_deconv,
                     transform_filter, transform_input, winograd_tdc_deconv, zero_padded_deconv)
from wdeconv.cli import main as cli_main
from wdeconv.cost_model import (CostModelInputs, mult_report, per_output_pixel, processing_time,
                                required_bandwidth, stall_free_bandwidth)
from wdeconv.winograd import AT, BT, CASE1, CASE2, CASE3, G

K5 = LayerConfig.upsampling(4, 3, 8, 8, 5)
K4 = LayerConfig.upsampling(4, 3, 8, 8, 4)
METHODS = (zero_padded_deconv, tdc_deconv, winograd_tdc_deconv)


def _direct_valid_corr(z, f):
    out = np.empty(z.shape[:-2] + (2, 2))
    for i in range(2):
        for j in range(2):
            out[..., i, j] = (z[..., i:i + 3, j:j + 3] * f).sum(axis=(-1, -2))
    return out


def test_c01_cross_method_equivalence(record_criterion):
    layers = random_layers(250, seed=2024, max_extent=16)
    start = time.perf_counter()
    worst64 = worst32 = 0.0
    for i, layer in enumerate(layers):
        for dtype in (np.float64, np.float32):
            x, w = random_layer_data(layer, 10 * i, dtype)
            ref = standard_deconv(x, w, layer)
            err = max(rel_err(fn(x, w, layer), ref) for fn in METHODS)
            if dtype is np.float64:
                worst64 = max(worst64, err)
            else:
                worst32 = max(worst32, err)
    elapsed = time.perf_counter() - start
    ok = worst64 <= 1e-9 and worst32 <= 1e-3 and elapsed < 60
    record_criterion(1, ok, f"{len(layers)} cases, max rel f64={worst64:.2e} f32={worst32:.2e}, "
                            f"{elapsed:.1f}s")
    assert ok


def test_c02_winograd_identity(record_criterion):
    rng = np.random.default_rng(7)
    f = rng.standard_normal((1000, 3, 3))
    z = rng.standard_normal((1000, 4, 4))
    got = inverse_transform(transform_filter(f) * transform_input(z))
    err = max(rel_err(g, r) for g, r in zip(got, _direct_valid_corr(z, f)))

    # 1D F(2, 3) with the constant matrices
    z1, g1 = np.array([1.0, 2, 3, 4]), np.array([1.0, 1, 1])
    m = (BT @ z1) * (G @ g1)
    y = AT @ m
    one_d = np.array_equal(m, [-2, 7.5, 0.5, -2]) and np.array_equal(y, [6, 9])
    ok = err <= 1e-12 and one_d
    record_criterion(2, ok, f"1000 tiles max rel={err:.2e}; 1D m={m.tolist()} y={y.tolist()}")
    assert ok


def test_c03_sparsity_taxonomy(record_criterion):
    found = {}
    exact_zeros = True
    for name, layer in (("K5S2", K5), ("K4S2", K4)):
        x, w = random_layer_data(layer, 3)
        fs = build_filter_set(w, layer)
        found[name] = Counter(fs.case_by_sub_filter().values())
        for key, zl in fs.zero_lines.items():
            flat = fs.U[key].reshape(layer.M, layer.N, 16)
            exact_zeros &= bool(np.all(flat[..., zl.zero_positions()] == 0.0))
            exact_zeros &= bool(np.all(flat[..., zl.live_mask()] != 0.0))
    ok = (found["K5S2"] == Counter({CASE1: 1, CASE2: 2, CASE3: 1})
          and found["K4S2"] == Counter({CASE3: 4}) and exact_zeros)
    record_criterion(3, ok, f"K5S2={dict(found['K5S2'])} K4S2={dict(found['K4S2'])} "
                            f"exact zeros={exact_zeros}")
    assert ok


def test_c04_live_mult_constant(record_criterion):
    counted = {}
    for layer in (K5, K4):
        x, w = random_layer_data(layer, 5)
        _, stats = winograd_tdc_deconv(x, w, layer, return_stats=True)
        instrumented = Fraction(stats["mults"], stats["tiles"] * layer.M * layer.N)
        counted[layer.k_c] = (live_mults_per_block(layer), instrumented)
    ok = counted[3] == (49, 49) and counted[2] == (36, 36)
    record_criterion(4, ok, f"K_C=3 -> {counted[3][0]} (instrumented {counted[3][1]}), "
                            f"K_C=2 -> {counted[2][0]} (instrumented {counted[2][1]})")
    assert ok


def test_c05_mult_ratios(record_criterion):
    px5 = per_output_pixel(load_preset("dcgan").layers[0])
    r_zw = px5["zero_padded"] / px5["winograd_skip"]
    r_zt = px5["zero_padded"] / px5["tdc_dense"]
    k4_ok = True
    for name in ("artgan", "discogan", "gp-gan"):
        for layer in load_preset(name).layers:
            px = per_output_pixel(layer)
            k4_ok &= px["tdc_dense"] / px["winograd_skip"] == Fraction(16, 9)
            k4_ok &= px["zero_padded"] / px["winograd_skip"] == Fraction(64, 9)
    report_ratio = mult_report(load_preset("dcgan"))["total_ratios"]["zero_padded/winograd"]
    ok = (r_zw == Fraction(400, 49) and f"{float(r_zw):.3g}" == "8.16"
          and r_zt == Fraction(25, 9) and abs(float(r_zt) / 2.79 - 1) <= 0.01
          and round(report_ratio, 2) == 8.16 and k4_ok)
    record_criterion(5, ok, f"zero_padded/winograd={r_zw}={float(r_zw):.4f}, "
                            f"zero_padded/tdc={r_zt}={float(r_zt):.4f}, K4 16/9 and 64/9: {k4_ok}")
    assert ok


def test_c06_total_mult_ordering(record_criterion):
    orders = {}
    for name in PRESETS:
        t = mult_report(load_preset(name))["totals"]
        orders[name] = t["winograd_skip"] < t["tdc_dense"] < t["zero_padded"]
    ok = all(orders.values())
    record_criterion(6, ok, ", ".join(f"{k}={v}" for k, v in orders.items()))
    assert ok


def test_c07_skip_path_soundness(record_criterion):
    layers = exhaustive_small_layers() + random_layers(100, seed=77)
    identical = True
    for i, layer in enumerate(layers):
        x, w = random_layer_data(layer, i)
        identical &= np.array_equal(winograd_tdc_deconv(x, w, layer, skip=True),
                                    winograd_tdc_deconv(x, w, layer, skip=False))
    label, zl = classify_sparsity(np.array([[0, 0, 0], [0, 1, 1], [0, 1, 1]], dtype=bool))
    _, skipped = sparse_inverse_transform(np.zeros((4, 4)), zl)
    x, w = random_layer_data(K4, 1)
    _, stats = winograd_tdc_deconv(x, w, K4, return_stats=True)
    per_tile = Fraction(stats["skipped_inverse_terms"], stats["tiles"] * K4.M * K4.stride ** 2)
    ok = identical and label == CASE3 and skipped == 7 and per_tile == 7
    record_criterion(7, ok, f"{len(layers)} layers bit-identical={identical}; "
                            f"Case3 skipped terms={skipped}, per tile in pipeline={per_tile}")
    assert ok


def _sim_configs():
    for name in PRESETS:
        for layer in load_preset(name).layers:
            for tm, tn in ((4, 128), (1, 1), (8, 64)):
                yield name, layer, tm, min(tn, layer.N)


def test_c08_cost_model_consistency(record_criterion):
    freq = 1e8
    worst = 0.0
    iff_failures = []
    n = 0
    for name, layer, tm, tn in _sim_configs():
        n += 1
        p = CostModelInputs(layer, tm, tn, freq, 1.0)
        bw_ok = 2 * stall_free_bandwidth(p)
        trace = simulate_layer(layer, tm, tn, bw_ok, freq)
        worst = max(worst, abs(trace.makespan / processing_time(p.with_(bandwidth=bw_ok)) - 1))

        req = required_bandwidth(p)
        at = simulate_layer(layer, tm, tn, req, freq).total_stall == 0
        below = simulate_layer(layer, tm, tn, req * (1 - 1e-9), freq).total_stall == 0
        if not at or below:
            iff_failures.append((name, layer.M, tm, tn))
    ok = worst <= 1e-9 and not iff_failures
    record_criterion(8, ok, f"makespan vs processing time max rel={worst:.1e}; zero-stall iff "
                            f"bandwidth >= closed-form requirement failed on {len(iff_failures)}/{n} "
                            f"(layer, tiling) configs")
    assert ok


def test_c09_line_buffer_law(record_criterion):
    overlap = {reuse_stats(l)["overlap_elements_per_tile_pair"]
               for l in (K5, K4, LayerConfig.upsampling(2, 2, 5, 7, 3))}
    within = True
    layers = [l for name in PRESETS for l in load_preset(name).layers] + random_layers(50, seed=9)
    for layer in layers:
        if layer.stride != 2 and layer.stride != 1:
            continue
        tm, tn = min(4, layer.stride ** 2 * layer.M), min(8, layer.N)
        trace = simulate_layer(layer, tm, tn, 1e9, 1e8)
        plan = trace.plan
        within &= max(trace.input_occupancy) <= plan.input_capacity
        within &= max(trace.output_occupancy) <= plan.output_capacity
        within &= plan.input_lines == 6 and plan.output_lines == 4 * layer.stride
    ok = overlap == {32} and within
    record_criterion(9, ok, f"overlap per tile pair={sorted(overlap)}; occupancy within "
                            f"(n+m)/2mS lines on {len(layers)} layers: {within}")
    assert ok


def test_c10_cli_contract(record_criterion, tmp_path, capsys):
    codes = {}
    for name in PRESETS:
        out = tmp_path / f"{name}.json"
        codes[name] = cli_main(["verify", "--model", name, "--out", str(out)])
    assert cli_main(["analyze", "--model", "dcgan", "--out", str(tmp_path / "a.json")]) == 0
    report = json.loads((tmp_path / "a.json").read_text())
    ratio = report["total_ratios"]["zero_padded/winograd"]
    ok = all(c == 0 for c in codes.values()) and round(ratio, 2) == 8.16
    record_criterion(10, ok, f"verify exit codes={codes}; analyze ratio={ratio:.4f}")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
