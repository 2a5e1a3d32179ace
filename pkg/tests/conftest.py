import numpy as np
import pytest

from mitovol.imaging import BinaryMask, RasterImage, Resolution


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def mask_of(bits, mpp: float = 1.0) -> BinaryMask:
    return BinaryMask(bits=np.asarray(bits, dtype=bool), resolution=Resolution(mpp))


def gray_image(values, mpp: float = 1.0) -> RasterImage:
    return RasterImage(data=np.asarray(values), resolution=Resolution(mpp))


def rgb_image(values, mpp: float = 1.0) -> RasterImage:
    return RasterImage(data=np.asarray(values, dtype=np.uint8), resolution=Resolution(mpp))
