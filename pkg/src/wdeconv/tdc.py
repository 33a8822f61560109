"""DeConv-to-Conv conversion (TDC).

A stride-``S`` DeConv with a ``K_D x K_D`` kernel is rewritten as ``S**2`` small
convolutions.  Sub-filter ``g[a, b]`` holds taps ``w[S*k + a, S*l + b]`` and produces
the output pixels whose phase inside each ``S x S`` block is ``(a, b)``.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import check_filter_bank, check_layer_inputs
from .core import ConfigError, LayerConfig


@dataclass(frozen=True)
class SubFilterSet:
    """All ``S**2`` sub-filters of a filter bank.

    ``weights`` has shape ``(S, S, M, N, K_C, K_C)`` and ``mask`` has shape
    ``(S, S, K_C, K_C)``; the mask depends only on ``(K_D, S)`` so it is shared by
    every ``(m, n)`` pair.
    """

    stride: int
    k_d: int
    weights: np.ndarray
    mask: np.ndarray

    @property
    def k_c(self) -> int:
        return self.weights.shape[-1]

    def effective_shape(self, a: int, b: int) -> tuple[int, int]:
        S, K = self.stride, self.k_d
        return -(-(K - a) // S), -(-(K - b) // S)

    def __getitem__(self, ab):
        """``(weights, mask)`` for phase ``(a, b)``."""
        a, b = ab
        return self.weights[a, b], self.mask[a, b]


def support_mask(k_d: int, stride: int) -> np.ndarray:
    """Boolean ``(S, S, K_C, K_C)``: true where ``S*k + a < K_D`` and ``S*l + b < K_D``."""
    S = stride
    k_c = -(-k_d // S)
    k = np.arange(k_c)
    along = (S * k[None, :] + np.arange(S)[:, None]) < k_d  # (S, K_C)
    return along[:, None, :, None] & along[None, :, None, :]


def decompose(w, stride: int) -> SubFilterSet:
    w = check_filter_bank(w)
    if stride < 1:
        raise ConfigError(f"stride must be >= 1, got {stride}")
    S = stride
    M, N, K, _ = w.shape
    k_c = -(-K // S)
    padded = np.zeros((M, N, S * k_c, S * k_c), dtype=w.dtype)
    padded[:, :, :K, :K] = w
    # padded[m, n, S*k + a, S*l + b] -> weights[a, b, m, n, k, l]
    weights = padded.reshape(M, N, k_c, S, k_c, S).transpose(3, 5, 0, 1, 2, 4).copy()
    return SubFilterSet(S, K, weights, support_mask(K, S))


@dataclass(frozen=True)
class OutputPhase:
    """One output phase along an axis, in cropped output coordinates.

    Output pixel ``S*u + out_phase`` (``0 <= u < count``) equals
    ``sum_k g[sub_phase][k] * x[u + shift - k]``.
    """

    out_phase: int
    sub_phase: int
    shift: int
    count: int


def output_phases(extent_in: int, layer: LayerConfig) -> list:
    S, pad = layer.stride, layer.pad
    extent_out = layer.stride * (extent_in - 1) + layer.k_d - 2 * pad + layer.out_pad
    phases = []
    for a_out in range(S):
        sub, shift = (a_out + pad) % S, (a_out + pad) // S
        count = max(0, -(-(extent_out - a_out) // S))
        phases.append(OutputPhase(a_out, sub, shift, count))
    return phases


def tdc_deconv(x, w, layer: LayerConfig, *, skip_zero_weights=False, return_stats=False):
    """Run the ``S**2`` sub-convolutions and interleave their outputs into ``S x S`` blocks."""
    x, w = check_layer_inputs(x, w, layer)
    subs = decompose(w, layer.stride)
    S, k_c = layer.stride, subs.k_c
    rows, cols = output_phases(layer.h_in, layer), output_phases(layer.w_in, layer)

    lead = k_c - 1
    trail_h = max(0, max(p.count - 1 + p.shift for p in rows) - (layer.h_in - 1))
    trail_w = max(0, max(p.count - 1 + p.shift for p in cols) - (layer.w_in - 1))
    xp = np.pad(x, ((0, 0), (lead, trail_h), (lead, trail_w)))

    y = np.zeros((layer.M, layer.h_out, layer.w_out), dtype=x.dtype)
    mults = 0
    for pr in rows:
        for pc in cols:
            if not pr.count or not pc.count:
                continue
            g, mask = subs[pr.sub_phase, pc.sub_phase]
            acc = np.zeros((layer.M, pr.count, pc.count), dtype=x.dtype)
            for k in range(k_c):
                for l in range(k_c):
                    if skip_zero_weights and not mask[k, l]:
                        continue
                    r0 = pr.shift - k + lead
                    c0 = pc.shift - l + lead
                    patch = xp[:, r0:r0 + pr.count, c0:c0 + pc.count]
                    acc += np.tensordot(g[:, :, k, l], patch, axes=(1, 0))
                    mults += layer.M * layer.N * pr.count * pc.count
            y[:, pr.out_phase::S, pc.out_phase::S] = acc
    if return_stats:
        return y, {"mults": mults}
    return y


def count_mults_tdc(layer: LayerConfig, skip_zero_weights: bool = False) -> int:
    """Multiplications of :func:`tdc_deconv`, counted per produced output pixel.

    Dense: ``K_C**2`` per output pixel.  With skipping: the live taps of the
    pixel's sub-filter, i.e. ``K_D**2`` per full ``S x S`` block.
    """
    MN = layer.M * layer.N
    if not skip_zero_weights:
        return MN * layer.k_c ** 2 * layer.h_out * layer.w_out

    def along(extent):
        mask = support_mask(layer.k_d, layer.stride)[:, 0, :, 0]  # (S, K_C)
        return sum(int(mask[p.sub_phase].sum()) * p.count for p in output_phases(extent, layer))

    return MN * along(layer.h_in) * along(layer.w_in)
