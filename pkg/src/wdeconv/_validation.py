"""Input checks shared by the execution paths and the estimators."""

import numpy as np

from .core import ConfigError, LayerConfig

FLOAT_DTYPES = (np.float32, np.float64)


def check_dtype(dtype):
    dtype = np.dtype(dtype)
    if dtype not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ConfigError(f"dtype must be float32 or float64, got {dtype}")
    return dtype


def check_feature_map(x, n_maps=None, dtype=None) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 3:
        raise ConfigError(f"feature map must be (channels, height, width), got shape {x.shape}")
    if min(x.shape) < 1:
        raise ConfigError(f"feature map has an empty dimension: {x.shape}")
    if n_maps is not None and x.shape[0] != n_maps:
        raise ConfigError(f"expected {n_maps} input maps, got {x.shape[0]}")
    if dtype is None:
        dtype = x.dtype if x.dtype in FLOAT_DTYPES else np.float64
    x = x.astype(check_dtype(dtype), copy=False)
    if not np.all(np.isfinite(x)):
        raise ConfigError("feature map contains NaN or inf")
    return x


def check_filter_bank(w, dtype=None) -> np.ndarray:
    w = np.asarray(w)
    if w.ndim != 4 or w.shape[2] != w.shape[3]:
        raise ConfigError(f"filter bank must be (M, N, K_D, K_D), got shape {w.shape}")
    if min(w.shape) < 1:
        raise ConfigError(f"filter bank has an empty dimension: {w.shape}")
    if dtype is None:
        dtype = w.dtype if w.dtype in FLOAT_DTYPES else np.float64
    w = w.astype(check_dtype(dtype), copy=False)
    if not np.all(np.isfinite(w)):
        raise ConfigError("filter bank contains NaN or inf")
    return w


def check_layer_inputs(x, w, layer: LayerConfig, dtype=None):
    """Validate ``(x, w)`` against ``layer``; returns both cast to one float dtype."""
    x, w = np.asarray(x), np.asarray(w)
    if dtype is None:
        dtype = np.result_type(x, w)
        if dtype not in FLOAT_DTYPES:
            dtype = np.float64
    x = check_feature_map(x, dtype=dtype)
    w = check_filter_bank(w, dtype=dtype)
    if x.shape != (layer.N, layer.h_in, layer.w_in):
        raise ConfigError(
            f"input shape {x.shape} does not match layer ({layer.N}, {layer.h_in}, {layer.w_in})"
        )
    if w.shape != (layer.M, layer.N, layer.k_d, layer.k_d):
        raise ConfigError(
            f"filter shape {w.shape} does not match layer "
            f"({layer.M}, {layer.N}, {layer.k_d}, {layer.k_d})"
        )
    return x, w


def max_rel_error(a, ref) -> float:
    """Max absolute difference, normalised by the largest reference magnitude."""
    a = np.asarray(a, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if a.shape != ref.shape:
        raise ConfigError(f"shape mismatch {a.shape} vs {ref.shape}")
    scale = float(np.max(np.abs(ref))) if ref.size else 0.0
    diff = float(np.max(np.abs(a - ref))) if ref.size else 0.0
    if scale == 0.0:
        return diff
    return diff / scale
