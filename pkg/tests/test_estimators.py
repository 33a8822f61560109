import numpy as np
import pytest
from sklearn.base import clone
from sklearn.pipeline import make_pipeline

from helpers import rel_err
from wdeconv import (ConfigError, DeconvTransformer, LayerConfig, TilingExplorer, load_preset,
                     random_layer_data, standard_deconv)

LAYER = LayerConfig.upsampling(3, 2, 5, 6, 5)
X, W = random_layer_data(LAYER, 0)


def make(method="winograd", **kw):
    return DeconvTransformer(weights=W, stride=2, pad=LAYER.pad, out_pad=LAYER.out_pad,
                             method=method, **kw)


def test_params_roundtrip():
    est = make(skip_zeros=False)
    params = est.get_params()
    assert params["method"] == "winograd" and params["skip_zeros"] is False
    est.set_params(method="tdc")
    assert clone(est).method == "tdc"


@pytest.mark.parametrize("method", ["standard", "zero_padded", "tdc", "winograd"])
def test_transform_matches_reference(method):
    est = make(method).fit(X)
    assert est.output_shape_ == (3, 10, 12)
    assert rel_err(est.transform(X), standard_deconv(X, W, LAYER)) < 1e-12
    assert len(est.stats_) == 1 and est.stats_[0]["mults"] > 0


def test_fit_prepares_filters():
    est = make().fit(X)
    assert est.layer_ == LAYER
    assert est.sub_filters_.weights.shape == (2, 2, 3, 2, 3, 3)
    assert sorted(est.cases_.values()) == ["Case1", "Case2", "Case2", "Case3"]


def test_batched_and_pipeline():
    batch = np.stack([X, 2 * X])
    y = make().fit_transform(batch)
    assert y.shape == (2, 3, 10, 12)
    assert rel_err(y[1], 2 * y[0]) < 1e-13
    pipe = make_pipeline(make("tdc"))
    assert pipe.fit_transform(batch).shape == (2, 3, 10, 12)


def test_float32():
    est = make(dtype="float32").fit(X)
    assert est.transform(X).dtype == np.float32


def test_errors():
    with pytest.raises(ConfigError):
        make("fft").fit(X)
    with pytest.raises(ConfigError):
        DeconvTransformer().fit(X)
    with pytest.raises(ConfigError):
        make().fit(X[:1])
    with pytest.raises(ConfigError):
        make().fit(X).transform(X[:, :4])
    with pytest.raises(ConfigError):
        make().fit(X[0])
    with pytest.raises(ConfigError):
        make(dtype="int8").fit(X)


def test_unfitted_transform():
    from sklearn.exceptions import NotFittedError
    with pytest.raises(NotFittedError):
        make().transform(X)


def test_tiling_explorer():
    model = load_preset("dcgan")
    tx = TilingExplorer(bandwidth=1e9, freq=1e8).fit(model)
    tilings = tx.predict()
    assert len(tilings) == 4 and all(t is not None for t in tilings)
    assert tx.tiling_ == (tx.joint_result_.best.T_m, tx.joint_result_.best.T_n)
    assert TilingExplorer(bandwidth=1.0).fit(model.layers[0]).predict() == [None]
    assert TilingExplorer(bandwidth=4e9, tm_candidates=[4], tn_candidates=[128]).fit(model).tiling_ == (4, 128)
