"""Winograd-accelerated transposed convolution for GAN generators.

Reference DeConv paths, the sub-filter (TDC) decomposition, sparse F(2x2, 3x3)
execution, an analytic accelerator cost model and a line-buffer simulator.
"""

__version__ = "0.1.0"

from .core import (ConfigError, FormatError, LayerConfig, ModelConfig, PRESETS,
                   UnsupportedConfigError, load_model, load_preset, model_from_dict,
                   output_dims, random_init, random_layer_data, save_model)
from .tensor_io import dumps_tensor, load_tensor, loads_tensor, save_tensor
from .oracle import (count_mults_standard, count_mults_zero_padded, standard_deconv,
                     upsample_zero_insert, zero_padded_deconv)
from .tdc import SubFilterSet, count_mults_tdc, decompose, output_phases, support_mask, tdc_deconv
from .winograd import (WinogradFilterSet, ZeroLines, build_filter_set, classify_sparsity,
                       count_mults_winograd, inverse_transform, live_mults_per_block,
                       sparse_inverse_transform, structural_cases, transform_filter,
                       transform_input, window_plan, winograd_apply, winograd_tdc_deconv)
from .cost_model import (CostModelInputs, DseResult, computational_roof, dse, dse_model,
                         mult_report, required_bandwidth, stall_free_bandwidth, t_compute,
                         t_initial, t_transfer)
from .buffer_sim import BufferPlan, InfeasiblePlanError, SimTrace, reuse_stats, simulate_layer
from .estimators import DeconvTransformer, TilingExplorer

__all__ = [name for name in dir() if not name.startswith("_")]
