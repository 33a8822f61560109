"""F(2x2, 3x3) minimal filtering applied to TDC sub-filters.

Transforms are written as explicit add/subtract/halve expressions so structural
zeros stay exactly zero and the dense and sparse inverse transforms agree bit for
bit.  The constant matrices are kept for reference and for tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ._validation import check_filter_bank, check_layer_inputs
from .core import LayerConfig, UnsupportedConfigError
from .tdc import decompose, output_phases

M_OUT = 2  # output tile
R_TAPS = 3  # filter taps
N_TILE = M_OUT + R_TAPS - 1  # input tile

BT = np.array([[1, 0, -1, 0], [0, 1, 1, 0], [0, -1, 1, 0], [0, 1, 0, -1]], dtype=np.float64)
G = np.array([[1, 0, 0], [0.5, 0.5, 0.5], [0.5, -0.5, 0.5], [0, 0, 1]], dtype=np.float64)
AT = np.array([[1, 1, 1, 0], [0, 1, -1, -1]], dtype=np.float64)

CASE1, CASE2, CASE3 = "Case1", "Case2", "Case3"


def _g_rows(f):
    f0, f1, f2 = f[..., 0, :], f[..., 1, :], f[..., 2, :]
    return np.stack([f0, (f0 + f1 + f2) * 0.5, (f0 - f1 + f2) * 0.5, f2], axis=-2)


def _bt_rows(z):
    z0, z1, z2, z3 = (z[..., i, :] for i in range(4))
    return np.stack([z0 - z2, z1 + z2, z2 - z1, z1 - z3], axis=-2)


def transform_filter(f) -> np.ndarray:
    """``G f G^T`` over the trailing ``3 x 3`` axes."""
    f = np.asarray(f)
    if f.shape[-2:] != (3, 3):
        raise ValueError(f"filter must end in (3, 3), got {f.shape}")
    return _g_rows(_g_rows(f).swapaxes(-1, -2)).swapaxes(-1, -2)


def transform_input(z) -> np.ndarray:
    """``B^T Z B`` over the trailing ``4 x 4`` axes."""
    z = np.asarray(z)
    if z.shape[-2:] != (4, 4):
        raise ValueError(f"input tile must end in (4, 4), got {z.shape}")
    return _bt_rows(_bt_rows(z).swapaxes(-1, -2)).swapaxes(-1, -2)


class ZeroLines(NamedTuple):
    """Structurally-zero rows and columns of a transformed ``4 x 4`` filter."""

    rows: frozenset
    cols: frozenset

    @property
    def live_rows(self):
        return tuple(i for i in range(N_TILE) if i not in self.rows)

    @property
    def live_cols(self):
        return tuple(j for j in range(N_TILE) if j not in self.cols)

    @property
    def zero_count(self) -> int:
        return N_TILE * N_TILE - len(self.live_rows) * len(self.live_cols)

    def zero_positions(self) -> list:
        """Flattened Winograd positions ``4*row + col`` that are structurally zero."""
        return sorted(4 * i + j for i in range(N_TILE) for j in range(N_TILE)
                      if i in self.rows or j in self.cols)

    def live_mask(self) -> np.ndarray:
        mask = np.zeros(N_TILE * N_TILE, dtype=bool)
        for i in self.live_rows:
            for j in self.live_cols:
                mask[4 * i + j] = True
        return mask


NO_ZERO_LINES = ZeroLines(frozenset(), frozenset())


def _zero_lines_along(live):
    # G's first row reads only tap 0, its last row only tap 2; the middle rows
    # mix all three taps and vanish only for an empty support.
    live = [bool(v) for v in live]
    if not any(live):
        return frozenset(range(N_TILE))
    zeros = set()
    if not live[0]:
        zeros.add(0)
    if not live[2]:
        zeros.add(3)
    return frozenset(zeros)


def classify_sparsity(mask) -> tuple[str, ZeroLines]:
    """Case label and zero lines of ``G f G^T`` for a ``3 x 3`` support mask."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (3, 3):
        raise ValueError(f"mask must be 3x3, got {mask.shape}")
    lines = ZeroLines(_zero_lines_along(mask.any(axis=1)), _zero_lines_along(mask.any(axis=0)))
    n_lines = len(lines.rows) + len(lines.cols)
    if n_lines == 0:
        return CASE1, lines
    if n_lines == 1:
        return CASE2, lines
    # One zero row plus one zero column; anything sparser is a degenerate Case 3.
    return CASE3, lines


def _combine(terms):
    """Ordered signed sum of ``(coef, array)`` pairs with ``coef`` in {+1, -1}."""
    acc = None
    for coef, term in terms:
        if acc is None:
            acc = term if coef > 0 else -term
        elif coef > 0:
            acc = acc + term
        else:
            acc = acc - term
    return acc


def _inverse(y_hat, live_rows, live_cols):
    y_hat = np.asarray(y_hat)
    lead = y_hat.shape[:-2]
    zero_row = np.zeros(lead + (N_TILE,), dtype=y_hat.dtype)
    stage = []
    for i in range(M_OUT):
        terms = [(AT[i, p], y_hat[..., p, :]) for p in live_rows if AT[i, p] != 0]
        stage.append(_combine(terms) if terms else zero_row)
    t = np.stack(stage, axis=-2)  # (..., 2, 4)
    zero_col = np.zeros(lead + (M_OUT,), dtype=y_hat.dtype)
    out = []
    for j in range(M_OUT):
        terms = [(AT[j, q], t[..., :, q]) for q in live_cols if AT[j, q] != 0]
        out.append(_combine(terms) if terms else zero_col)
    return np.stack(out, axis=-1)


def inverse_transform(y_hat) -> np.ndarray:
    """``A^T Y A`` over the trailing ``4 x 4`` axes."""
    return _inverse(y_hat, range(N_TILE), range(N_TILE))


def sparse_inverse_transform(y_hat, zero_lines: ZeroLines):
    """Inverse transform that leaves structurally-zero positions out of the contraction.

    Returns ``(out, skipped_terms)`` where ``skipped_terms`` counts excluded
    positions per tile.  Values equal :func:`inverse_transform` exactly when
    ``y_hat`` is zero on ``zero_lines``.
    """
    return _inverse(y_hat, zero_lines.live_rows, zero_lines.live_cols), zero_lines.zero_count


def winograd_correlate(z, f) -> np.ndarray:
    """One F(2x2, 3x3) tile: valid ``2 x 2`` correlation of a ``4 x 4`` tile with a ``3 x 3`` filter."""
    return inverse_transform(transform_filter(f) * transform_input(z))


# --- window placement ---------------------------------------------------------


@dataclass(frozen=True)
class PhaseWindow:
    """Placement of one output phase's sub-filter taps inside a 3-tap input window.

    Output ``S*u + out_phase`` reads inputs ``x[u + base + t]`` for ``t`` in 0..2 with
    weight ``g[sub_phase][taps[t]]`` (``taps[t] == -1`` marks an empty slot).
    """

    out_phase: int
    sub_phase: int
    base: int
    taps: tuple


def window_plan(layer: LayerConfig) -> tuple[PhaseWindow, ...]:
    """Shared input window for every output phase when the taps fit in three slots.

    Sharing lets one transformed input tile feed all ``S**2`` sub-filters.  When
    the phases' taps span more than three inputs, each phase gets its own base and
    its taps are packed to the front of the window.
    """
    if layer.k_c > R_TAPS:
        raise UnsupportedConfigError(
            f"Winograd F(2x2,3x3) needs K_C <= 3, i.e. K_D <= 3*S; "
            f"got K_D={layer.k_d}, S={layer.stride} (K_C={layer.k_c})"
        )
    S, K = layer.stride, layer.k_d
    phases = output_phases(1, layer)
    n_taps = [max(0, -(-(K - p.sub_phase) // S)) for p in phases]
    lows = [p.shift - e + 1 for p, e in zip(phases, n_taps)]
    shared = min(lows)
    use_shared = max(p.shift for p in phases) - shared <= R_TAPS - 1
    plan = []
    for p, e, low in zip(phases, n_taps, lows):
        base = shared if use_shared else low
        taps = []
        for t in range(R_TAPS):
            k = p.shift - base - t
            taps.append(k if 0 <= k < e else -1)
        plan.append(PhaseWindow(p.out_phase, p.sub_phase, base, tuple(taps)))
    return tuple(plan)


def _place(g, taps_r, taps_c):
    """Scatter a ``(..., K_C, K_C)`` sub-filter into a ``(..., 3, 3)`` window."""
    f = np.zeros(g.shape[:-2] + (R_TAPS, R_TAPS), dtype=g.dtype)
    mask = np.zeros((R_TAPS, R_TAPS), dtype=bool)
    for tr, kr in enumerate(taps_r):
        for tc, kc in enumerate(taps_c):
            if kr >= 0 and kc >= 0:
                f[..., tr, tc] = g[..., kr, kc]
                mask[tr, tc] = True
    return f, mask


# --- filter set ---------------------------------------------------------------


@dataclass
class WinogradFilterSet:
    """Transformed sub-filters of one layer, indexed by output phase ``(a', b')``.

    ``U`` has shape ``(S, S, M, N, 4, 4)``; ``masks``/``cases``/``zero_lines`` are
    per output phase and shared by all channels.  ``sub_filter_of`` maps an output
    phase to the TDC sub-filter ``(a, b)`` it carries.
    """

    layer: LayerConfig
    plan: tuple
    U: np.ndarray
    masks: np.ndarray
    cases: dict = field(default_factory=dict)
    zero_lines: dict = field(default_factory=dict)
    sub_filter_of: dict = field(default_factory=dict)

    def reordered(self, a_out: int, b_out: int) -> np.ndarray:
        """``M`` matrices of shape ``16 x N``: row = Winograd position, column = channel."""
        U = self.U[a_out, b_out]
        M, N = U.shape[:2]
        return U.reshape(M, N, N_TILE * N_TILE).transpose(0, 2, 1)

    def case_by_sub_filter(self) -> dict:
        return dict(sorted((self.sub_filter_of[k], v) for k, v in self.cases.items()))

    def live_mults_per_block(self) -> int:
        """Live Winograd multiplications per ``mS x mS`` output block per (m, n) pair."""
        return sum(N_TILE * N_TILE - zl.zero_count for zl in self.zero_lines.values())


def build_filter_set(w, layer: LayerConfig) -> WinogradFilterSet:
    """Decompose, place each sub-filter in its 3x3 window and transform it once."""
    w = check_filter_bank(w)
    plan = window_plan(layer)
    subs = decompose(w, layer.stride)
    S = layer.stride
    M, N = w.shape[:2]
    U = np.zeros((S, S, M, N, N_TILE, N_TILE), dtype=w.dtype)
    masks = np.zeros((S, S, R_TAPS, R_TAPS), dtype=bool)
    fs = WinogradFilterSet(layer, plan, U, masks)
    for pr in plan:
        for pc in plan:
            g = subs.weights[pr.sub_phase, pc.sub_phase]
            f, mask = _place(g, pr.taps, pc.taps)
            key = (pr.out_phase, pc.out_phase)
            U[key] = transform_filter(f)
            masks[key] = mask
            fs.cases[key], fs.zero_lines[key] = classify_sparsity(mask)
            fs.sub_filter_of[key] = (pr.sub_phase, pc.sub_phase)
    return fs


def reorder_filters(fs: WinogradFilterSet) -> dict:
    return {key: fs.reordered(*key) for key in fs.cases}


# --- inputs -------------------------------------------------------------------


@dataclass(frozen=True)
class TransformedInputMatrix:
    """Transformed ``4 x 4`` tiles laid out as ``16 x N`` per tile.

    ``V`` has shape ``(T_h, T_w, 16, N)``; tile ``(i, j)`` covers inputs starting at
    ``(2*i + base_r, 2*j + base_c)``.  Neighbouring tiles overlap by ``n - m`` lines.
    """

    V: np.ndarray
    base_r: int
    base_c: int

    @property
    def n_tiles(self) -> int:
        return self.V.shape[0] * self.V.shape[1]


def extract_tiles(x, base_r: int, base_c: int, tiles_h: int, tiles_w: int) -> np.ndarray:
    """``(N, T_h, T_w, 4, 4)`` input tiles at stride ``m``; out-of-range inputs are zero."""
    N, H, W = x.shape
    lead_r, lead_c = max(0, -base_r), max(0, -base_c)
    need_h = 2 * (tiles_h - 1) + base_r + N_TILE + lead_r
    need_w = 2 * (tiles_w - 1) + base_c + N_TILE + lead_c
    xp = np.pad(x, ((0, 0), (lead_r, max(0, need_h - lead_r - H)), (lead_c, max(0, need_w - lead_c - W))))
    r0, c0 = base_r + lead_r, base_c + lead_c
    win = np.lib.stride_tricks.sliding_window_view(xp, (N_TILE, N_TILE), axis=(1, 2))
    return win[:, r0:r0 + 2 * tiles_h:2, c0:c0 + 2 * tiles_w:2][:, :tiles_h, :tiles_w]


def reorder_inputs(x, base_r: int, base_c: int, tiles_h: int, tiles_w: int) -> TransformedInputMatrix:
    tiles = extract_tiles(x, base_r, base_c, tiles_h, tiles_w)
    V = transform_input(tiles)  # (N, T_h, T_w, 4, 4)
    N = V.shape[0]
    V = V.reshape(N, tiles_h, tiles_w, N_TILE * N_TILE).transpose(1, 2, 3, 0)
    return TransformedInputMatrix(np.ascontiguousarray(V), base_r, base_c)


def sparse_multiply_accumulate(inputs: TransformedInputMatrix, filters, zero_lines: ZeroLines,
                               skip: bool = True):
    """Channel-summed element-wise products, one Winograd position (matrix row) at a time.

    ``filters`` is the reordered ``(M, 16, N)`` stack.  Returns
    ``(Y_hat, mults)`` with ``Y_hat`` of shape ``(T_h, T_w, M, 4, 4)``.  With
    ``skip`` the all-zero rows are neither multiplied nor accumulated.
    """
    V = inputs.V
    T_h, T_w, P, N = V.shape
    M = filters.shape[0]
    if filters.shape[2] != N:
        raise ValueError(f"filter matrices have {filters.shape[2]} channels, inputs have {N}")
    live = zero_lines.live_mask() if skip else np.ones(P, dtype=bool)
    y_hat = np.zeros((T_h, T_w, M, P), dtype=np.result_type(V, filters))
    for pos in np.flatnonzero(live):
        y_hat[..., pos] = V[..., pos, :] @ filters[:, pos, :].T
    mults = int(live.sum()) * N * M * T_h * T_w
    return y_hat.reshape(T_h, T_w, M, N_TILE, N_TILE), mults


# --- full pipeline ------------------------------------------------------------


def winograd_apply(x, fs: WinogradFilterSet, layer: LayerConfig, *, skip=True, return_stats=False):
    """Run a prepared filter set over one ``(N, H, W)`` input."""
    S = layer.stride
    rows, cols = output_phases(layer.h_in, layer), output_phases(layer.w_in, layer)
    tiles_h = -(-max(p.count for p in rows) // M_OUT)
    tiles_w = -(-max(p.count for p in cols) // M_OUT)
    y = np.zeros((layer.M, layer.h_out, layer.w_out), dtype=x.dtype)
    stats = {"mults": 0, "mults_dense": 0, "skipped_rows": 0, "skipped_inverse_terms": 0,
             "input_transforms": 0, "tiles": tiles_h * tiles_w}
    transformed = {}
    for pr, count_r in zip(fs.plan, (p.count for p in rows)):
        for pc, count_c in zip(fs.plan, (p.count for p in cols)):
            if not count_r or not count_c:
                continue
            key = (pr.out_phase, pc.out_phase)
            bases = (pr.base, pc.base)
            if bases not in transformed:
                transformed[bases] = reorder_inputs(x, *bases, tiles_h, tiles_w)
                stats["input_transforms"] += tiles_h * tiles_w * layer.N
            zl = fs.zero_lines[key]
            y_hat, mults = sparse_multiply_accumulate(transformed[bases], fs.reordered(*key), zl, skip)
            if skip:
                out, skipped = sparse_inverse_transform(y_hat, zl)
            else:
                out, skipped = inverse_transform(y_hat), 0
            n_blocks = tiles_h * tiles_w * layer.M
            stats["mults"] += mults
            stats["mults_dense"] += N_TILE * N_TILE * layer.N * n_blocks
            stats["skipped_rows"] += (zl.zero_count if skip else 0) * n_blocks
            stats["skipped_inverse_terms"] += skipped * n_blocks
            # (T_h, T_w, M, 2, 2) -> (M, 2*T_h, 2*T_w)
            plane = out.transpose(2, 0, 3, 1, 4).reshape(layer.M, M_OUT * tiles_h, M_OUT * tiles_w)
            y[:, pr.out_phase::S, pc.out_phase::S] = plane[:, :count_r, :count_c]
    stats["cases"] = fs.case_by_sub_filter()
    if return_stats:
        return y, stats
    return y


def winograd_tdc_deconv(x, w, layer: LayerConfig, *, skip=True, return_stats=False):
    """DeConv through TDC sub-filters and F(2x2, 3x3), skipping structural zeros."""
    x, w = check_layer_inputs(x, w, layer)
    fs = build_filter_set(w, layer)
    return winograd_apply(x, fs, layer, skip=skip, return_stats=return_stats)


def count_mults_winograd(layer: LayerConfig, skip: bool = True) -> int:
    """Element-wise multiplications :func:`winograd_tdc_deconv` performs."""
    rows, cols = output_phases(layer.h_in, layer), output_phases(layer.w_in, layer)
    tiles = (-(-max(p.count for p in rows) // M_OUT)) * (-(-max(p.count for p in cols) // M_OUT))
    per_block = live_mults_per_block(layer) if skip else N_TILE * N_TILE * _active_phases(layer)
    return layer.M * layer.N * tiles * per_block


def _active_phases(layer):
    rows, cols = output_phases(layer.h_in, layer), output_phases(layer.w_in, layer)
    return sum(1 for p in rows if p.count) * sum(1 for p in cols if p.count)


def structural_cases(layer: LayerConfig) -> dict:
    """``{(a, b): (case_label, zero_lines)}`` for the active sub-filters, from structure alone."""
    plan = window_plan(layer)
    rows, cols = output_phases(layer.h_in, layer), output_phases(layer.w_in, layer)
    out = {}
    for pr, p_r in zip(plan, rows):
        for pc, p_c in zip(plan, cols):
            if not p_r.count or not p_c.count:
                continue
            mask = np.outer([t >= 0 for t in pr.taps], [t >= 0 for t in pc.taps])
            out[(pr.sub_phase, pc.sub_phase)] = classify_sparsity(mask)
    return dict(sorted(out.items()))


def live_mults_per_block(layer: LayerConfig) -> int:
    """Live multiplications per ``mS x mS`` output block, summed over the active sub-filters."""
    return sum(N_TILE * N_TILE - zl.zero_count for _, zl in structural_cases(layer).values())
