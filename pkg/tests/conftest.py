import numpy as np
import pytest

from palmcount.raster import Raster
from palmcount.synth import SynthConfig, generate_scene


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_scene():
    """A quick deterministic 240x240 scene with a handful of crowns."""
    cfg = SynthConfig(width=240, height=240, count_range=(4, 7), min_spacing=50.0)
    return generate_scene(cfg, seed=99)


@pytest.fixture
def random_raster(rng):
    return Raster(rng.uniform(0.0, 1.0, size=(37, 53, 1)).astype(np.float32))
