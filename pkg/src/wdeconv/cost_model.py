"""Multiplication counters and the accelerator timing / bandwidth / roofline model.

Bandwidth is in elements per second throughout; convert bytes at the boundary
with ``element_bytes``.  ``W_l``/``H_l`` of the timing model are bound to the
layer's *input* extents.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction

from .core import ConfigError, LayerConfig, ModelConfig, UnsupportedConfigError
from .oracle import count_mults_standard, count_mults_zero_padded
from .tdc import count_mults_tdc
from .winograd import M_OUT, N_TILE, R_TAPS, count_mults_winograd, live_mults_per_block

# Fixed C(K_C) for the (K_D, S) pairs it was derived from; other shapes use the count.
FIXED_C = {(4, 2): 36, (5, 2): 49}
TRANSFER_MODELS = ("winograd", "spatial")


def live_mult_constant(layer: LayerConfig) -> int:
    """``C(K_C)``: 36 for K_D=4, 49 for K_D=5 (stride 2), else the counted live multiplications."""
    return FIXED_C.get((layer.k_d, layer.stride)) or live_mults_per_block(layer)


# --- multiplication report ----------------------------------------------------

METHODS = ("standard", "zero_padded", "zero_padded_skip", "tdc_dense", "tdc_skip",
           "winograd_dense", "winograd_skip")


def layer_mult_counts(layer: LayerConfig) -> dict:
    counts = {
        "standard": count_mults_standard(layer),
        "zero_padded": count_mults_zero_padded(layer),
        "zero_padded_skip": count_mults_zero_padded(layer, skip_zero_activations=True),
        "tdc_dense": count_mults_tdc(layer),
        "tdc_skip": count_mults_tdc(layer, skip_zero_weights=True),
    }
    try:
        counts["winograd_dense"] = count_mults_winograd(layer, skip=False)
        counts["winograd_skip"] = count_mults_winograd(layer, skip=True)
    except UnsupportedConfigError:
        counts["winograd_dense"] = counts["winograd_skip"] = None
    return counts


def per_output_pixel(layer: LayerConfig) -> dict:
    """Exact per-output-pixel, per-(m, n) multiplication cost of each method."""
    scale = layer.M * layer.N * layer.h_out * layer.w_out
    return {k: (None if v is None else Fraction(v, scale)) for k, v in layer_mult_counts(layer).items()}


def mult_report(model: ModelConfig) -> dict:
    layers, totals = [], dict.fromkeys(METHODS, 0)
    for i, layer in enumerate(model.layers):
        counts = layer_mult_counts(layer)
        px = per_output_pixel(layer)
        entry = {"index": i, "layer": layer.to_dict(), "k_c": layer.k_c, "mults": counts,
                 "per_output_pixel": {k: (None if v is None else float(v)) for k, v in px.items()}}
        if counts["winograd_skip"] is None:
            entry["unsupported"] = f"winograd: K_C={layer.k_c} > 3 (needs K_D <= 3*S)"
        else:
            entry["C_counted"] = live_mults_per_block(layer)
            entry["C_model"] = live_mult_constant(layer)
            entry["ratios"] = {
                "zero_padded/winograd": float(px["zero_padded"] / px["winograd_skip"]),
                "tdc_dense/winograd": float(px["tdc_dense"] / px["winograd_skip"]),
                "zero_padded/tdc_dense": float(px["zero_padded"] / px["tdc_dense"]),
            }
        layers.append(entry)
        for k in METHODS:
            if totals[k] is not None:
                totals[k] = None if counts[k] is None else totals[k] + counts[k]
    report = {"model": model.name, "layers": layers, "totals": totals}
    if totals["winograd_skip"]:
        report["total_ratios"] = {
            "zero_padded/winograd": totals["zero_padded"] / totals["winograd_skip"],
            "tdc_dense/winograd": totals["tdc_dense"] / totals["winograd_skip"],
            "zero_padded/tdc_dense": totals["zero_padded"] / totals["tdc_dense"],
        }
    return report


# --- timing model -------------------------------------------------------------


@dataclass(frozen=True)
class CostModelInputs:
    layer: LayerConfig
    T_m: int
    T_n: int
    freq: float
    bandwidth: float
    element_bytes: int = 4
    C: int | None = None
    transfer_model: str = "winograd"

    def __post_init__(self):
        S2M = self.layer.stride ** 2 * self.layer.M
        if not 1 <= self.T_m <= S2M:
            raise ConfigError(f"T_m must be in [1, S^2*M={S2M}], got {self.T_m}")
        if not 1 <= self.T_n <= self.layer.N:
            raise ConfigError(f"T_n must be in [1, N={self.layer.N}], got {self.T_n}")
        if not self.freq > 0:
            raise ConfigError(f"freq must be > 0, got {self.freq}")
        if not self.bandwidth > 0:
            raise ConfigError(f"bandwidth must be > 0, got {self.bandwidth}")
        if self.transfer_model not in TRANSFER_MODELS:
            raise ConfigError(f"transfer_model must be one of {TRANSFER_MODELS}")
        if self.C is None:
            object.__setattr__(self, "C", live_mult_constant(self.layer))

    def with_(self, **changes) -> "CostModelInputs":
        return replace(self, **changes)


def t_compute(p: CostModelInputs) -> float:
    """Time to process one row group (``m`` input rows across the width)."""
    L, m = p.layer, M_OUT
    loops = math.ceil(L.stride ** 2 * L.M / p.T_m) * math.ceil(L.N / p.T_n) * math.ceil(L.w_in / m)
    return loops * (p.C / m ** 2) / p.freq


def _transfer_elements(p: CostModelInputs) -> float:
    L, m = p.layer, M_OUT
    elems = m * L.stride * L.w_in * L.stride ** 2 * L.M
    return elems * N_TILE ** 2 if p.transfer_model == "winograd" else elems


def t_transfer(p: CostModelInputs) -> float:
    """Output transfer time for one row group."""
    return _transfer_elements(p) / p.bandwidth


def required_bandwidth(p: CostModelInputs) -> float:
    """Bandwidth requirement in the closed form used to rank tilings."""
    L, m, n = p.layer, M_OUT, N_TILE
    return (m ** 2 / p.C) * math.ceil(p.T_m * p.T_n / L.N) * (m * L.stride) * n ** 2 * p.freq


def stall_free_bandwidth(p: CostModelInputs) -> float:
    """Smallest bandwidth with ``t_transfer <= t_compute`` (exact ping-pong threshold)."""
    return _transfer_elements(p) / t_compute(p)


def t_initial(p: CostModelInputs) -> float:
    """Time to fetch the first ``n`` input rows and all filters."""
    L, n = p.layer, N_TILE
    elems = L.stride ** 2 * L.M * L.N * R_TAPS ** 2 + n * L.w_in * L.N
    return elems / (p.bandwidth / n ** 2)


def total_ops(layer: LayerConfig) -> int:
    """Multiply-accumulates counted by the roofline numerator (each is 2 ops)."""
    return layer.stride ** 2 * layer.M * layer.N * layer.h_in * layer.w_in * R_TAPS ** 2


def row_groups(layer: LayerConfig) -> int:
    return math.ceil(layer.h_in / M_OUT)


def processing_time(p: CostModelInputs) -> float:
    return row_groups(p.layer) * t_compute(p) + t_initial(p)


def computational_roof(p: CostModelInputs) -> float:
    """Attainable ops/s for this tiling."""
    return 2 * total_ops(p.layer) / processing_time(p)


# --- design space exploration -------------------------------------------------


def default_candidates(limit: int) -> list:
    """Powers of two below ``limit``, plus ``limit`` itself."""
    out, v = [], 1
    while v < limit:
        out.append(v)
        v *= 2
    out.append(limit)
    return out


@dataclass(frozen=True)
class DsePoint:
    T_m: int
    T_n: int
    computational_roof: float
    required_bandwidth: float
    stall_free_bandwidth: float
    t_compute: float
    t_transfer: float
    t_initial: float
    feasible: bool


@dataclass
class DseResult:
    points: list = field(default_factory=list)
    chosen: int | None = None
    bandwidth_cap: float = math.inf
    min_required_bandwidth: float = math.inf

    @property
    def feasible(self) -> bool:
        return self.chosen is not None

    @property
    def best(self) -> DsePoint | None:
        return None if self.chosen is None else self.points[self.chosen]

    def to_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "chosen": self.chosen,
            "chosen_tiling": None if self.best is None else [self.best.T_m, self.best.T_n],
            "bandwidth_cap": self.bandwidth_cap,
            "min_required_bandwidth": self.min_required_bandwidth,
            "points": [asdict(p) for p in self.points],
        }


def _select(points) -> int | None:
    best = None
    for i, pt in enumerate(points):
        if not pt.feasible:
            continue
        if best is None:
            best = i
            continue
        b = points[best]
        if pt.computational_roof > b.computational_roof or (
            pt.computational_roof == b.computational_roof and pt.T_m * pt.T_n < b.T_m * b.T_n
        ):
            best = i
    return best


def dse(layer: LayerConfig, bandwidth_cap: float, freq: float, tm_candidates=None,
        tn_candidates=None, transfer_model: str = "winograd") -> DseResult:
    """Enumerate ``(T_m, T_n)`` and pick the highest roof whose requirement fits the cap.

    Ties go to the smaller ``T_m * T_n`` (less on-chip buffering).  With an
    infinite cap the initial-fetch time is zero.
    """
    tms = sorted(set(tm_candidates or default_candidates(layer.stride ** 2 * layer.M)))
    tns = sorted(set(tn_candidates or default_candidates(layer.N)))
    if not tms or not tns:
        raise ConfigError("candidate sets must be non-empty")
    result = DseResult(bandwidth_cap=bandwidth_cap)
    for tm in tms:
        for tn in tns:
            p = CostModelInputs(layer, tm, tn, freq, bandwidth_cap, transfer_model=transfer_model)
            req = required_bandwidth(p)
            result.points.append(DsePoint(
                tm, tn, computational_roof(p), req, stall_free_bandwidth(p),
                t_compute(p), t_transfer(p), t_initial(p), req <= bandwidth_cap,
            ))
            result.min_required_bandwidth = min(result.min_required_bandwidth, req)
    result.chosen = _select(result.points)
    return result


def dse_model(model, bandwidth_cap: float, freq: float, tm_candidates=None,
              tn_candidates=None, transfer_model: str = "winograd") -> DseResult:
    """One ``(T_m, T_n)`` for every layer: maximise whole-model ops / whole-model time.

    ``model`` is a :class:`ModelConfig` or any sequence of layers.
    """
    layers = model.layers if isinstance(model, ModelConfig) else tuple(model)
    tm_limit = min(l.stride ** 2 * l.M for l in layers)
    tn_limit = min(l.N for l in layers)
    tms = sorted(set(tm_candidates or default_candidates(tm_limit)))
    tns = sorted(set(tn_candidates or default_candidates(tn_limit)))
    ops = sum(total_ops(l) for l in layers)
    result = DseResult(bandwidth_cap=bandwidth_cap)
    for tm in tms:
        for tn in tns:
            ins = [CostModelInputs(l, tm, tn, freq, bandwidth_cap, transfer_model=transfer_model)
                   for l in layers]
            req = max(required_bandwidth(p) for p in ins)
            result.points.append(DsePoint(
                tm, tn, 2 * ops / sum(processing_time(p) for p in ins), req,
                max(stall_free_bandwidth(p) for p in ins),
                sum(t_compute(p) for p in ins), sum(t_transfer(p) for p in ins),
                sum(t_initial(p) for p in ins), req <= bandwidth_cap,
            ))
            result.min_required_bandwidth = min(result.min_required_bandwidth, req)
    result.chosen = _select(result.points)
    return result


def cost_rows(model: ModelConfig, T_m: int, T_n: int, freq: float, bandwidth: float,
              transfer_model: str = "winograd") -> list:
    """Flat per-(layer, method) rows for the JSON/CSV report."""
    rows = []
    for i, layer in enumerate(model.layers):
        tm = min(T_m, layer.stride ** 2 * layer.M)
        tn = min(T_n, layer.N)
        p = CostModelInputs(layer, tm, tn, freq, bandwidth, transfer_model=transfer_model)
        timing = {"T_C": t_compute(p), "T_D": t_transfer(p), "T_I": t_initial(p),
                  "roof": computational_roof(p), "bandwidth": required_bandwidth(p)}
        for method, mults in layer_mult_counts(layer).items():
            rows.append({"model": model.name, "layer": i, "method": method, "mults": mults,
                         **timing, "chosen": f"{tm}x{tn}"})
    return rows
