"""Layer/model configuration, dimension arithmetic and seeded tensor init."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np


class ConfigError(ValueError):
    """Raised for invalid layer/model configurations or mismatched shapes."""


class UnsupportedConfigError(ConfigError):
    """Raised when a configuration is valid but outside what a method supports."""


class FormatError(ValueError):
    """Malformed model or tensor file. ``location`` pinpoints the problem."""

    def __init__(self, message: str, location: str = ""):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


PRESETS = ("dcgan", "artgan", "discogan", "gp-gan")


@dataclass(frozen=True)
class LayerConfig:
    """One DeConv layer: ``N`` input maps of ``h_in x w_in`` -> ``M`` output maps."""

    M: int
    N: int
    h_in: int
    w_in: int
    k_d: int
    stride: int
    pad: int = 0
    out_pad: int = 0

    def __post_init__(self):
        for name in ("M", "N", "h_in", "w_in", "k_d", "stride"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        if not 0 <= self.pad < self.k_d:
            raise ConfigError(f"pad must satisfy 0 <= pad < k_d={self.k_d}, got {self.pad}")
        if not 0 <= self.out_pad < self.stride:
            raise ConfigError(
                f"out_pad must satisfy 0 <= out_pad < stride={self.stride}, got {self.out_pad}"
            )
        h_out, w_out = _out_extent(self.h_in, self), _out_extent(self.w_in, self)
        if h_out <= 0 or w_out <= 0:
            raise ConfigError(f"layer produces empty output ({h_out}x{w_out})")

    @property
    def k_c(self) -> int:
        return -(-self.k_d // self.stride)

    @property
    def h_out(self) -> int:
        return _out_extent(self.h_in, self)

    @property
    def w_out(self) -> int:
        return _out_extent(self.w_in, self)

    def to_dict(self) -> dict:
        return {k: int(v) for k, v in asdict(self).items()}

    @classmethod
    def upsampling(cls, M, N, h_in, w_in, k_d, stride=2):
        """Layer with pad/out_pad chosen so the output is exactly ``stride`` times larger."""
        pad = max(0, math.ceil((k_d - stride) / 2))
        return cls(M, N, h_in, w_in, k_d, stride, pad, stride - k_d + 2 * pad)


def _out_extent(extent: int, layer: LayerConfig) -> int:
    return layer.stride * (extent - 1) + layer.k_d - 2 * layer.pad + layer.out_pad


def output_dims(layer: LayerConfig) -> tuple[int, int]:
    """(H_O, W_O) under transposed-convolution arithmetic."""
    return layer.h_out, layer.w_out


@dataclass(frozen=True)
class ModelConfig:
    name: str
    layers: tuple[LayerConfig, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ConfigError(f"model {self.name!r} has no layers")
        for i, (prev, nxt) in enumerate(zip(self.layers, self.layers[1:])):
            if (prev.M, prev.h_out, prev.w_out) != (nxt.N, nxt.h_in, nxt.w_in):
                raise ConfigError(
                    f"layers[{i}] output ({prev.M}x{prev.h_out}x{prev.w_out}) does not feed "
                    f"layers[{i + 1}] input ({nxt.N}x{nxt.h_in}x{nxt.w_in})"
                )

    def to_dict(self) -> dict:
        return {"name": self.name, "layers": [l.to_dict() for l in self.layers]}


_LAYER_KEYS = ("M", "N", "h_in", "w_in", "k_d", "stride", "pad", "out_pad")


def model_from_dict(doc, source: str = "<model>") -> ModelConfig:
    if not isinstance(doc, dict):
        raise FormatError("top level must be an object", source)
    if not isinstance(doc.get("name"), str):
        raise FormatError("missing or non-string 'name'", f"{source}:name")
    layers_doc = doc.get("layers")
    if not isinstance(layers_doc, list):
        raise FormatError("missing or non-list 'layers'", f"{source}:layers")
    layers = []
    for i, ld in enumerate(layers_doc):
        where = f"{source}:layers[{i}]"
        if not isinstance(ld, dict):
            raise FormatError("layer must be an object", where)
        unknown = set(ld) - set(_LAYER_KEYS)
        if unknown:
            raise FormatError(f"unknown keys {sorted(unknown)}", where)
        kwargs = {}
        for key in _LAYER_KEYS:
            if key not in ld:
                if key in ("pad", "out_pad"):
                    continue
                raise FormatError(f"missing key {key!r}", where)
            if not isinstance(ld[key], int) or isinstance(ld[key], bool):
                raise FormatError(f"{key!r} must be an integer", f"{where}.{key}")
            kwargs[key] = ld[key]
        try:
            layers.append(LayerConfig(**kwargs))
        except ConfigError as exc:
            raise ConfigError(f"{where}: {exc}") from None
    return ModelConfig(doc["name"], tuple(layers))


def load_model(path) -> ModelConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(exc.msg, f"{path}:{exc.lineno}:{exc.colno}") from None
    return model_from_dict(doc, str(path))


def save_model(model: ModelConfig, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=2) + "\n")


def load_preset(name: str) -> ModelConfig:
    key = name.lower()
    if key not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    text = resources.files("wdeconv.presets").joinpath(f"{key}.json").read_text()
    return model_from_dict(json.loads(text), f"preset:{key}")


def random_init(shape, seed: int, dtype=np.float64) -> np.ndarray:
    """Uniform samples in [-1, 1); identical for identical ``(shape, seed, dtype)``."""
    shape = tuple(int(s) for s in shape)
    if any(s < 1 for s in shape):
        raise ConfigError(f"all dimensions must be >= 1, got {shape}")
    rng = np.random.default_rng(seed)
    return rng.uniform(-1.0, 1.0, size=shape).astype(dtype)


def random_layer_data(layer: LayerConfig, seed: int, dtype=np.float64):
    """Seeded ``(x, w)`` pair shaped for ``layer``."""
    x = random_init((layer.N, layer.h_in, layer.w_in), seed, dtype)
    w = random_init((layer.M, layer.N, layer.k_d, layer.k_d), seed + 1, dtype)
    return x, w
