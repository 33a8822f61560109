"""Reference DeConv paths: scatter-accumulate and zero-insertion + correlation.

Both are deliberately simple; every fast path is checked against them.
"""

import numpy as np

from ._validation import check_layer_inputs
from .core import LayerConfig


def standard_deconv(x, w, layer: LayerConfig, *, return_stats=False):
    """Scatter each input pixel through the kernel and accumulate overlapping blocks.

    ``y[m, p, q] = sum_n sum_{i,j} x[n, i, j] * w[m, n, p + pad - S*i, q + pad - S*j]``
    with out-of-range taps dropped.
    """
    x, w = check_layer_inputs(x, w, layer)
    S, K, pad = layer.stride, layer.k_d, layer.pad
    H, W = layer.h_in, layer.w_in
    H_O, W_O = layer.h_out, layer.w_out
    full = np.zeros(
        (layer.M, max(S * (H - 1) + K, pad + H_O), max(S * (W - 1) + K, pad + W_O)),
        dtype=x.dtype,
    )
    # Tap-major loop; the channel sum is a single contraction per tap.
    for ki in range(K):
        for kj in range(K):
            block = np.tensordot(w[:, :, ki, kj], x, axes=(1, 0))
            full[:, ki:ki + S * (H - 1) + 1:S, kj:kj + S * (W - 1) + 1:S] += block
    y = full[:, pad:pad + H_O, pad:pad + W_O].copy()
    if return_stats:
        return y, {"mults": count_mults_standard(layer)}
    return y


def upsample_zero_insert(x, layer: LayerConfig) -> np.ndarray:
    """Insert ``S - 1`` zeros between neighbouring pixels (no border padding)."""
    S = layer.stride
    N, H, W = x.shape
    up = np.zeros((N, S * (H - 1) + 1, S * (W - 1) + 1), dtype=x.dtype)
    up[:, ::S, ::S] = x
    return up


def _border(layer: LayerConfig):
    lead = layer.k_d - 1 - layer.pad
    return lead, lead + layer.out_pad


def zero_padded_deconv(x, w, layer: LayerConfig, *, return_stats=False):
    """Upsample with zeros, pad the border, then correlate with the 180-degree rotated kernel."""
    x, w = check_layer_inputs(x, w, layer)
    K = layer.k_d
    H_O, W_O = layer.h_out, layer.w_out
    lead, trail = _border(layer)
    padded = np.pad(upsample_zero_insert(x, layer), ((0, 0), (lead, trail), (lead, trail)))
    rot = w[:, :, ::-1, ::-1]
    y = np.zeros((layer.M, H_O, W_O), dtype=x.dtype)
    for i in range(K):
        for j in range(K):
            y += np.tensordot(rot[:, :, i, j], padded[:, i:i + H_O, j:j + W_O], axes=(1, 0))
    if return_stats:
        return y, {
            "mults": count_mults_zero_padded(layer),
            "mults_skip_zero_activations": count_mults_zero_padded(layer, True),
        }
    return y


def count_mults_standard(layer: LayerConfig) -> int:
    return layer.N * layer.M * layer.k_d ** 2 * layer.h_in * layer.w_in


def _live_taps_along(extent: int, out_extent: int, layer: LayerConfig) -> int:
    # (output, tap) pairs along one axis whose upsampled operand is a real sample.
    lead, trail = _border(layer)
    S, K = layer.stride, layer.k_d
    real = np.zeros(lead + S * (extent - 1) + 1 + trail, dtype=np.int64)
    real[lead:lead + S * (extent - 1) + 1:S] = 1
    window = np.convolve(real, np.ones(K, dtype=np.int64), mode="valid")
    return int(window[:out_extent].sum())


def count_mults_zero_padded(layer: LayerConfig, skip_zero_activations: bool = False) -> int:
    """Multiplications of the zero-insertion path.

    Without skipping every output pixel costs ``K_D**2`` per (m, n) pair.  With
    skipping only taps that land on a real (non-inserted, non-border) sample count.
    """
    if not skip_zero_activations:
        return layer.N * layer.M * layer.k_d ** 2 * layer.h_out * layer.w_out
    rows = _live_taps_along(layer.h_in, layer.h_out, layer)
    cols = _live_taps_along(layer.w_in, layer.w_out, layer)
    return layer.N * layer.M * rows * cols
