"""Command-line front end: verify, analyze, explore, simulate.

Exit codes: 0 success, 1 verification failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._validation import max_rel_error
from .buffer_sim import reuse_stats, simulate_layer
from .core import (ConfigError, FormatError, LayerConfig, ModelConfig, PRESETS, load_model,
                   load_preset, random_layer_data)
from .cost_model import cost_rows, dse, dse_model, live_mult_constant, mult_report
from .oracle import standard_deconv, zero_padded_deconv
from .tdc import tdc_deconv
from .winograd import M_OUT, structural_cases, winograd_tdc_deconv

SCHEMA_VERSION = 1
EXIT_OK, EXIT_MISMATCH, EXIT_CONFIG = 0, 1, 2
DEFAULT_TOL = {"f32": 1e-3, "f64": 1e-9}

_LAYER_ALIASES = {
    "m": "M", "n": "N", "kd": "k_d", "k": "k_d", "s": "stride", "h": "h_in", "w": "w_in",
    "op": "out_pad", "outpad": "out_pad",
}


def parse_layer_spec(spec: str) -> LayerConfig:
    """``"M=8,N=16,h_in=8,w_in=8,kd=5,s=2[,pad=2,out_pad=1]"`` -> LayerConfig.

    Missing channel counts default to 4, spatial size to 8; missing padding
    defaults to exact ``stride``-times upsampling.
    """
    fields = {}
    for item in filter(None, (s.strip() for s in spec.split(","))):
        if item == "...":
            continue
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--layer: expected key=value, got {item!r}")
        key = key.strip()
        key = _LAYER_ALIASES.get(key.lower(), key)
        if key == "hw":
            try:
                fields["h_in"] = fields["w_in"] = int(value)
            except ValueError:
                raise ConfigError(f"--layer: {item!r} is not an integer") from None
            continue
        if key not in ("M", "N", "h_in", "w_in", "k_d", "stride", "pad", "out_pad"):
            raise ConfigError(f"--layer: unknown key {key!r}")
        try:
            fields[key] = int(value)
        except ValueError:
            raise ConfigError(f"--layer: {item!r} is not an integer") from None
    if "k_d" not in fields:
        raise ConfigError("--layer: k_d (kd) is required")
    base = dict(M=4, N=4, h_in=8, w_in=8, stride=2)
    base.update({k: v for k, v in fields.items() if k not in ("pad", "out_pad")})
    default = LayerConfig.upsampling(base["M"], base["N"], base["h_in"], base["w_in"],
                                     base["k_d"], base["stride"])
    pad = fields.get("pad", default.pad)
    out_pad = fields.get("out_pad", default.out_pad if "pad" not in fields else 0)
    return LayerConfig(base["M"], base["N"], base["h_in"], base["w_in"], base["k_d"],
                       base["stride"], pad, out_pad)


def resolve_model(args) -> ModelConfig:
    given = [a for a in ("model", "config", "layer") if getattr(args, a, None)]
    if len(given) != 1:
        raise ConfigError("give exactly one of --model, --config, --layer")
    if args.model:
        return load_preset(args.model)
    if args.config:
        return load_model(args.config)
    return ModelConfig("layer", (parse_layer_spec(args.layer),))


def _emit(args, doc: dict, rows: list | None = None) -> None:
    doc = {"schema_version": SCHEMA_VERSION, **doc}
    if args.format == "csv":
        if rows is None:
            raise ConfigError("this report has no CSV form")
        buf = io.StringIO()
        keys = ["schema_version"] + list(rows[0]) if rows else ["schema_version"]
        writer = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
        writer.writeheader()
        for r in rows:
            writer.writerow({"schema_version": SCHEMA_VERSION, **r})
        text = buf.getvalue()
    else:
        text = json.dumps(doc, indent=2, default=_json_default) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (set, frozenset, tuple)):
        return sorted(obj)
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def _bandwidth_elements(args) -> float:
    if args.bw <= 0 or args.elem_bytes <= 0:
        raise ConfigError("--bw and --elem-bytes must be positive")
    return args.bw / args.elem_bytes


# --- verify -------------------------------------------------------------------

VERIFY_METHODS = {
    "standard": standard_deconv,
    "zero_padded": zero_padded_deconv,
    "tdc": tdc_deconv,
    "winograd_tdc": winograd_tdc_deconv,
}


def verify_layer(layer: LayerConfig, seed: int, dtype, tol: float) -> dict:
    x, w = random_layer_data(layer, seed, dtype)
    outputs, mults = {}, {}
    for name, fn in VERIFY_METHODS.items():
        outputs[name], stats = fn(x, w, layer, return_stats=True)
        mults[name] = stats["mults"]
    pairs, ok, worst = {}, True, None
    for a, b in itertools.combinations(VERIFY_METHODS, 2):
        err = max_rel_error(outputs[b], outputs[a])
        pairs[f"{a}~{b}"] = err
        if not err <= tol:
            ok = False
            diff = np.abs(outputs[b].astype(np.float64) - outputs[a])
            m, p, q = np.unravel_index(int(np.argmax(diff)), diff.shape)
            block = M_OUT * layer.stride
            worst = {"pair": f"{a}~{b}", "map": int(m), "pixel": [int(p), int(q)],
                     "tile": [int(p) // block, int(q) // block]}
    return {"layer": layer.to_dict(), "max_rel_error": pairs, "mults": mults, "ok": ok,
            "worst": worst}


def cmd_verify(args) -> int:
    model = resolve_model(args)
    dtype = np.float32 if args.dtype == "f32" else np.float64
    tol = DEFAULT_TOL[args.dtype] if args.tol is None else args.tol
    for layer in model.layers:
        structural_cases(layer)  # rejects K_C > 3 before any work
    results = [verify_layer(layer, args.seed + 2 * i, dtype, tol) for i, layer in enumerate(model.layers)]
    ok = all(r["ok"] for r in results)
    rows = [{"model": model.name, "layer": i, "pair": pair, "max_rel_error": err, "ok": r["ok"]}
            for i, r in enumerate(results) for pair, err in r["max_rel_error"].items()]
    _emit(args, {"command": "verify", "config": model.to_dict(), "seed": args.seed,
                 "dtype": args.dtype, "tol": tol, "ok": ok, "layers": results}, rows)
    if not ok:
        for i, r in enumerate(results):
            if r["worst"]:
                print(f"mismatch in layer {i}: {r['worst']}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_MISMATCH


# --- analyze ------------------------------------------------------------------


def cmd_analyze(args) -> int:
    model = resolve_model(args)
    report = mult_report(model)
    for entry, layer in zip(report["layers"], model.layers):
        if "unsupported" in entry:
            continue
        entry["sub_filters"] = {
            f"{a},{b}": {"case": case, "zero_rows": sorted(zl.rows), "zero_cols": sorted(zl.cols),
                         "zero_weights": zl.zero_count}
            for (a, b), (case, zl) in structural_cases(layer).items()
        }
        entry["C_cross_check"] = {"counted": entry["C_counted"], "model": live_mult_constant(layer),
                                  "agree": entry["C_counted"] == live_mult_constant(layer)}
        entry["reuse"] = reuse_stats(layer)
    bw = _bandwidth_elements(args)
    rows = cost_rows(model, args.tm, args.tn, args.freq, bw)
    report["rows"] = rows
    _emit(args, {"command": "analyze", "config": model.to_dict(), "freq": args.freq,
                 "bandwidth_elements": bw, "tiling": [args.tm, args.tn],
                 "extent_binding": "W_l/H_l bound to input extents", **report}, rows)
    return EXIT_OK


# --- explore ------------------------------------------------------------------


def _pareto(points) -> list:
    front = []
    for i, p in enumerate(points):
        dominated = any(
            q.computational_roof >= p.computational_roof and q.required_bandwidth <= p.required_bandwidth
            and (q.computational_roof > p.computational_roof or q.required_bandwidth < p.required_bandwidth)
            for q in points
        )
        if not dominated:
            front.append(i)
    return front


def cmd_explore(args) -> int:
    model = resolve_model(args)
    bw = _bandwidth_elements(args)
    per_layer, rows = [], []
    for i, layer in enumerate(model.layers):
        res = dse(layer, bw, args.freq)
        doc = res.to_dict()
        doc["pareto"] = _pareto(res.points)
        per_layer.append(doc)
        for j, p in enumerate(res.points):
            rows.append({"model": model.name, "layer": i, "T_m": p.T_m, "T_n": p.T_n,
                         "roof": p.computational_roof, "bandwidth": p.required_bandwidth,
                         "T_C": p.t_compute, "T_D": p.t_transfer, "T_I": p.t_initial,
                         "feasible": p.feasible, "pareto": j in doc["pareto"],
                         "chosen": j == res.chosen})
    joint = dse_model(model, bw, args.freq)
    joint_doc = joint.to_dict()
    joint_doc["pareto"] = _pareto(joint.points)
    _emit(args, {"command": "explore", "config": model.to_dict(), "freq": args.freq,
                 "bandwidth_elements": bw, "element_bytes": args.elem_bytes,
                 "layers": per_layer, "joint": joint_doc,
                 "reference_tiling_4x128_chosen": joint_doc["chosen_tiling"] == [4, 128]}, rows)
    return EXIT_OK


# --- simulate -----------------------------------------------------------------


def cmd_simulate(args) -> int:
    model = resolve_model(args)
    bw = _bandwidth_elements(args)
    traces, rows = [], []
    for i, layer in enumerate(model.layers):
        tm = min(args.tm, layer.stride ** 2 * layer.M)
        tn = min(args.tn, layer.N)
        trace = simulate_layer(layer, tm, tn, bw, args.freq, onchip_budget=args.budget)
        traces.append(trace.to_dict())
        for g, (c, d, s) in enumerate(zip(trace.compute_time, trace.transfer_time, trace.stall_time)):
            rows.append({"layer": i, "row_group": g, "compute": c, "transfer": d, "stall": s})
    _emit(args, {"command": "simulate", "config": model.to_dict(), "freq": args.freq,
                 "bandwidth_elements": bw, "tiling": [args.tm, args.tn], "layers": traces}, rows)
    return EXIT_OK


# --- entry point --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wdeconv", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_argument_group("layer source")
    src.add_argument("--model", choices=PRESETS)
    src.add_argument("--config", help="model JSON file")
    src.add_argument("--layer", help="inline spec, e.g. M=8,N=16,hw=8,kd=5,s=2")
    common.add_argument("--out", help="write report here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")

    hw = argparse.ArgumentParser(add_help=False)
    hw.add_argument("--bw", type=float, default=4e9, help="off-chip bandwidth, bytes/s")
    hw.add_argument("--freq", type=float, default=1e8, help="clock, Hz")
    hw.add_argument("--elem-bytes", type=int, default=4)

    tiling = argparse.ArgumentParser(add_help=False)
    tiling.add_argument("--tm", type=int, default=4)
    tiling.add_argument("--tn", type=int, default=128)

    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("verify", parents=[common], help="cross-check all DeConv paths")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dtype", choices=("f32", "f64"), default="f64")
    p.add_argument("--tol", type=float, default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("analyze", parents=[common, hw, tiling], help="mult counts, sparsity, timing")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("explore", parents=[common, hw], help="tiling design-space exploration")
    p.set_defaults(func=cmd_explore)

    p = sub.add_parser("simulate", parents=[common, hw, tiling], help="line-buffer dataflow trace")
    p.add_argument("--budget", type=int, default=None, help="on-chip buffer budget, elements")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        return args.func(args)
    except (ConfigError, FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())


def main_exit() -> None:
    sys.exit(main())
