"""scikit-learn style wrappers around the DeConv paths and the tiling explorer."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_dtype, check_feature_map, check_filter_bank
from .core import ConfigError, LayerConfig, ModelConfig
from .cost_model import dse, dse_model
from .oracle import standard_deconv, zero_padded_deconv
from .tdc import decompose, tdc_deconv
from .winograd import build_filter_set, winograd_apply

DECONV_METHODS = ("standard", "zero_padded", "tdc", "winograd")


class DeconvTransformer(TransformerMixin, BaseEstimator):
    """Apply a fixed DeConv layer to ``(N, H, W)`` maps or ``(B, N, H, W)`` batches.

    ``fit`` reads the input geometry and prepares the filters once (TDC
    sub-filters, and for ``method="winograd"`` the transformed filter set);
    ``transform`` runs the chosen execution path.

    Parameters
    ----------
    weights : array of shape (M, N, K_D, K_D)
    stride, pad, out_pad : int
        Transposed-convolution geometry.
    method : {"standard", "zero_padded", "tdc", "winograd"}
    skip_zeros : bool
        Skip structural zeros (TDC sub-filter padding, Winograd zero lines).
    dtype : {"float32", "float64"}
    """

    def __init__(self, weights=None, stride=2, pad=0, out_pad=0, method="winograd",
                 skip_zeros=True, dtype="float64"):
        self.weights = weights
        self.stride = stride
        self.pad = pad
        self.out_pad = out_pad
        self.method = method
        self.skip_zeros = skip_zeros
        self.dtype = dtype

    def _check_X(self, X, n_maps=None):
        X = np.asarray(X)
        if X.ndim == 3:
            return check_feature_map(X, n_maps, self.dtype_)[None], False
        if X.ndim == 4:
            return np.stack([check_feature_map(x, n_maps, self.dtype_) for x in X]), True
        raise ConfigError(f"expected (N, H, W) or (B, N, H, W) input, got shape {X.shape}")

    def fit(self, X, y=None):
        if self.method not in DECONV_METHODS:
            raise ConfigError(f"method must be one of {DECONV_METHODS}, got {self.method!r}")
        if self.weights is None:
            raise ConfigError("weights must be set before fit")
        self.dtype_ = check_dtype(self.dtype)
        w = check_filter_bank(self.weights, self.dtype_)
        X, _ = self._check_X(X, w.shape[1])
        _, N, H, W = X.shape
        self.layer_ = LayerConfig(w.shape[0], N, H, W, w.shape[2], self.stride, self.pad, self.out_pad)
        self.weights_ = w
        self.sub_filters_ = decompose(w, self.stride)
        if self.method == "winograd":
            self.filter_set_ = build_filter_set(w, self.layer_)
            self.cases_ = self.filter_set_.case_by_sub_filter()
        self.n_input_maps_ = N
        self.output_shape_ = (self.layer_.M, self.layer_.h_out, self.layer_.w_out)
        return self

    def _run(self, x):
        layer, w = self.layer_, self.weights_
        if self.method == "standard":
            return standard_deconv(x, w, layer, return_stats=True)
        if self.method == "zero_padded":
            return zero_padded_deconv(x, w, layer, return_stats=True)
        if self.method == "tdc":
            return tdc_deconv(x, w, layer, skip_zero_weights=self.skip_zeros, return_stats=True)
        return winograd_apply(x, self.filter_set_, layer, skip=self.skip_zeros, return_stats=True)

    def transform(self, X):
        check_is_fitted(self, "layer_")
        X, batched = self._check_X(X, self.n_input_maps_)
        if X.shape[2:] != (self.layer_.h_in, self.layer_.w_in):
            raise ConfigError(
                f"fitted on {self.layer_.h_in}x{self.layer_.w_in} maps, got {X.shape[2]}x{X.shape[3]}"
            )
        outs, self.stats_ = [], []
        for x in X:
            y, stats = self._run(x)
            outs.append(y)
            self.stats_.append(stats)
        Y = np.stack(outs)
        return Y if batched else Y[0]


class TilingExplorer(BaseEstimator):
    """Pick ``(T_m, T_n)`` per layer and jointly for a whole model.

    ``bandwidth`` is in elements/s.
    """

    def __init__(self, bandwidth=1e9, freq=1e8, tm_candidates=None, tn_candidates=None,
                 transfer_model="winograd"):
        self.bandwidth = bandwidth
        self.freq = freq
        self.tm_candidates = tm_candidates
        self.tn_candidates = tn_candidates
        self.transfer_model = transfer_model

    @staticmethod
    def _layers(X):
        if isinstance(X, ModelConfig):
            return X.layers
        if isinstance(X, LayerConfig):
            return (X,)
        return tuple(X)

    def fit(self, X, y=None):
        layers = self._layers(X)
        kw = dict(tm_candidates=self.tm_candidates, tn_candidates=self.tn_candidates,
                  transfer_model=self.transfer_model)
        self.results_ = [dse(l, self.bandwidth, self.freq, **kw) for l in layers]
        self.joint_result_ = dse_model(layers, self.bandwidth, self.freq, **kw)
        best = self.joint_result_.best
        self.tiling_ = None if best is None else (best.T_m, best.T_n)
        return self

    def predict(self, X=None):
        """Chosen per-layer tilings (``None`` where no tiling meets the bandwidth cap)."""
        check_is_fitted(self, "results_")
        if X is not None:
            self.fit(X)
        return [None if r.best is None else (r.best.T_m, r.best.T_n) for r in self.results_]
