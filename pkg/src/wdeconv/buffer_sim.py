"""Row-group simulator of the line-buffered, ping-pong dataflow.

Each step processes ``m`` input rows: the fused pre/compute/post stage takes
``t_compute`` while the previous group's output drains to DRAM in ``t_transfer``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

from .core import ConfigError, LayerConfig
from .cost_model import CostModelInputs, t_compute, t_initial, t_transfer
from .tdc import output_phases
from .winograd import M_OUT, N_TILE


# Transfer times within this relative margin of the compute time count as overlapped;
# it absorbs last-ulp rounding when the bandwidth is computed from a closed form.
STALL_RTOL = 1e-12


class InfeasiblePlanError(ConfigError):
    """The line buffers for the requested tiling do not fit the on-chip budget."""


@dataclass(frozen=True)
class BufferPlan:
    layer: LayerConfig
    T_m: int
    T_n: int

    @property
    def input_lines(self) -> int:
        return N_TILE + M_OUT

    @property
    def output_lines(self) -> int:
        return 2 * M_OUT * self.layer.stride

    @property
    def input_capacity(self) -> int:
        return self.input_lines * self.layer.w_in * self.T_n

    @property
    def output_capacity(self) -> int:
        return self.output_lines * self.layer.w_out * self.T_m

    @property
    def output_half(self) -> int:
        return self.output_capacity // 2

    @property
    def total_capacity(self) -> int:
        return self.input_capacity + self.output_capacity


@dataclass
class SimTrace:
    compute_time: list = field(default_factory=list)
    transfer_time: list = field(default_factory=list)
    stall_time: list = field(default_factory=list)
    input_occupancy: list = field(default_factory=list)
    output_occupancy: list = field(default_factory=list)
    initial_time: float = 0.0
    fetched_elements: int = 0
    reused_elements: int = 0
    plan: BufferPlan | None = None

    @property
    def total_compute(self) -> float:
        return sum(self.compute_time)

    @property
    def total_transfer(self) -> float:
        return sum(self.transfer_time)

    @property
    def total_stall(self) -> float:
        return sum(self.stall_time)

    @property
    def makespan(self) -> float:
        return self.initial_time + sum(max(c, d) for c, d in zip(self.compute_time, self.transfer_time))

    def to_dict(self) -> dict:
        return {
            "plan": None if self.plan is None else {
                "layer": self.plan.layer.to_dict(), "T_m": self.plan.T_m, "T_n": self.plan.T_n,
                "input_capacity": self.plan.input_capacity,
                "output_capacity": self.plan.output_capacity,
            },
            "initial_time": self.initial_time,
            "makespan": self.makespan,
            "total_compute": self.total_compute,
            "total_transfer": self.total_transfer,
            "total_stall": self.total_stall,
            "fetched_elements": self.fetched_elements,
            "reused_elements": self.reused_elements,
            "row_groups": [
                {"row_group": i, "compute": c, "transfer": d, "stall": s,
                 "input_occupancy": io_, "output_occupancy": oo}
                for i, (c, d, s, io_, oo) in enumerate(zip(
                    self.compute_time, self.transfer_time, self.stall_time,
                    self.input_occupancy, self.output_occupancy))
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["row_group", "compute", "transfer", "stall"])
        for i, (c, d, s) in enumerate(zip(self.compute_time, self.transfer_time, self.stall_time)):
            writer.writerow([i, repr(c), repr(d), repr(s)])
        return buf.getvalue()


def _tiles_along(extent_in: int, layer: LayerConfig) -> int:
    return -(-max(p.count for p in output_phases(extent_in, layer)) // M_OUT)


def reuse_stats(layer: LayerConfig) -> dict:
    """Input reuse between neighbouring ``n x n`` tiles, per input channel.

    Each tile feeds all ``S**2`` sub-filters, so two adjacent tiles share
    ``(n - m) * n * S**2`` accesses.
    """
    S = layer.stride
    per_pair = (N_TILE - M_OUT) * N_TILE * S ** 2
    th, tw = _tiles_along(layer.h_in, layer), _tiles_along(layer.w_in, layer)
    pairs = th * (tw - 1) + (th - 1) * tw
    naive = th * tw * N_TILE ** 2 * S ** 2
    reused = pairs * per_pair
    return {
        "overlap_elements_per_tile_pair": per_pair,
        "tiles": th * tw,
        "tile_pairs": pairs,
        "naive_accesses": naive,
        "reused_accesses": reused,
        "reuse_ratio": reused / naive,
    }


def simulate_layer(layer: LayerConfig, T_m: int, T_n: int, bandwidth: float, freq: float,
                   onchip_budget: int | None = None, transfer_model: str = "winograd") -> SimTrace:
    """Step through the row groups of one layer.

    ``bandwidth`` is in elements/s.  ``onchip_budget`` (elements) bounds the sum of
    the input and output line buffers.
    """
    plan = BufferPlan(layer, T_m, T_n)
    if onchip_budget is not None and plan.total_capacity > onchip_budget:
        raise InfeasiblePlanError(
            f"line buffers need {plan.total_capacity} elements "
            f"(input {plan.input_capacity} + output {plan.output_capacity}), "
            f"budget is {onchip_budget}"
        )
    p = CostModelInputs(layer, T_m, T_n, freq, bandwidth, transfer_model=transfer_model)
    tc, td = t_compute(p), t_transfer(p)
    m, n, S = M_OUT, N_TILE, layer.stride
    trace = SimTrace(initial_time=t_initial(p), plan=plan)

    groups = math.ceil(layer.h_in / m)
    H = layer.h_in
    fetched_rows = min(n, H)  # initial fill
    out_prev = 0
    for g in range(groups):
        # Window of n rows in use, next m rows prefetched; border rows are never fetched.
        current = min(H, m * g + n) - min(H, m * g)
        incoming = min(H, m * g + n + m) - min(H, m * g + n)
        fetched_rows += incoming
        in_lines = current + incoming
        out_lines = m * S + out_prev  # one half written, the other draining
        if in_lines > plan.input_lines or out_lines > plan.output_lines:
            raise AssertionError("line buffer overflow")
        trace.input_occupancy.append(in_lines * layer.w_in * T_n)
        trace.output_occupancy.append(out_lines * layer.w_out * T_m)
        trace.compute_time.append(tc)
        trace.transfer_time.append(td)
        trace.stall_time.append(td - tc if td > tc * (1 + STALL_RTOL) else 0.0)
        out_prev = m * S
    trace.fetched_elements = fetched_rows * layer.w_in * layer.N
    trace.reused_elements = reuse_stats(layer)["reused_accesses"] * layer.N
    return trace
