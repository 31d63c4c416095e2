import math

import numpy as np
import pytest

from unpixel.image import RasterImage, l2_distance


def psnr(a: RasterImage, b: RasterImage) -> float:
    mse = l2_distance(a, b) / a.planes.size
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(255.0 ** 2 / mse)


def random_image(rng, channels=1, height=32, width=32) -> RasterImage:
    return RasterImage(rng.integers(0, 256, (channels, height, width), dtype=np.uint8))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
