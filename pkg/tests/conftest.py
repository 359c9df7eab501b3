import numpy as np
import pytest

from srlab.imgcore import Image


def rand_image(seed: int, height: int, width: int, channels: int = 3) -> Image:
    rng = np.random.default_rng(seed)
    return Image(rng.random((channels, height, width)))


def noisy_copy(img: Image, seed: int, sigma: float) -> Image:
    """img plus clipped Gaussian noise, for correlated metric test pairs."""
    rng = np.random.default_rng(seed)
    return Image(np.clip(img.data + rng.standard_normal(img.data.shape) * sigma, 0.0, 1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
