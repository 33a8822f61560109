"""Shared seeded case generators for the test-suite."""

import numpy as np

from wdeconv import ConfigError, LayerConfig

GRID_CONFIGS = ((5, 2), (4, 2), (3, 1), (3, 2), (6, 2))


def random_layers(n_cases, seed=0, max_channels=6, max_extent=12):
    """Seeded valid layers over ``GRID_CONFIGS`` with random pad / out_pad."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n_cases:
        k, s = GRID_CONFIGS[len(out) % len(GRID_CONFIGS)]
        try:
            layer = LayerConfig(
                int(rng.integers(1, max_channels + 1)), int(rng.integers(1, max_channels + 1)),
                int(rng.integers(1, max_extent + 1)), int(rng.integers(1, max_extent + 1)),
                k, s, int(rng.integers(0, k)), int(rng.integers(0, s)),
            )
        except ConfigError:
            continue
        out.append(layer)
    return out


def exhaustive_small_layers(extents=(1, 2, 3, 5)):
    """Every (K_D, S, pad, out_pad) of the grid with a few small extents."""
    layers = []
    for k, s in GRID_CONFIGS:
        for pad in range(k):
            for op in range(s):
                for h in extents:
                    try:
                        layers.append(LayerConfig(2, 3, h, h + 1, k, s, pad, op))
                    except ConfigError:
                        pass
    return layers


def rel_err(a, ref):
    a, ref = np.asarray(a, dtype=np.float64), np.asarray(ref, dtype=np.float64)
    scale = np.abs(ref).max()
    return float(np.abs(a - ref).max() / scale) if scale else float(np.abs(a).max())
