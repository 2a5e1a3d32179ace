"""Grayscale blur, global thresholding, and binary morphology.

Structuring elements are inclusive integer-radius disks
{(dx, dy) : dx² + dy² <= r²}. Pixels outside the image count as background
for both dilation and erosion, so erosion shrinks foreground at the borders.
Erosion and dilation are computed through exact Euclidean distance
transforms, which reproduces the disk definition bit-exactly while staying
fast for large kernels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import InvalidInputError, InvalidParameterError
from .imaging import BinaryMask, RasterImage


@dataclass(frozen=True)
class DiskKernel:
    """Disk structuring element of non-negative integer radius."""

    radius: int

    def __post_init__(self):
        if not isinstance(self.radius, (int, np.integer)) or self.radius < 0:
            raise InvalidParameterError(f"radius must be a non-negative integer, got {self.radius!r}")
        object.__setattr__(self, "radius", int(self.radius))

    def footprint(self) -> np.ndarray:
        """(2r+1)² boolean support: dx² + dy² <= r²."""
        r = self.radius
        dy, dx = np.mgrid[-r:r + 1, -r:r + 1]
        return (dx * dx + dy * dy) <= r * r


def gaussian_blur(image: RasterImage, sigma: float) -> RasterImage:
    """Separable Gaussian blur of a unit-float grayscale image.

    The 1-D kernel is truncated at radius ceil(3*sigma) and renormalized to
    sum exactly 1, so constant images are fixed points. Edges are handled by
    clamp-to-edge replication. ``sigma == 0`` returns the input unchanged.

    Parameters
    ----------
    image : grayscale unit-float RasterImage.
    sigma : standard deviation in pixels, >= 0.
    """
    if sigma < 0:
        raise InvalidParameterError(f"sigma must be >= 0, got {sigma}")
    if image.channels != 1 or image.is_byte:
        raise InvalidInputError("gaussian_blur expects a unit-float grayscale image")
    if sigma == 0:
        return image
    radius = math.ceil(3.0 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(x * x) / (2.0 * sigma * sigma))
    kernel /= kernel.sum()
    blurred = ndimage.correlate1d(image.data, kernel, axis=0, mode="nearest")
    blurred = ndimage.correlate1d(blurred, kernel, axis=1, mode="nearest")
    # Renormalized kernel keeps values inside [0, 1] up to rounding noise.
    np.clip(blurred, 0.0, 1.0, out=blurred)
    return RasterImage(data=blurred, resolution=image.resolution)


def otsu_threshold(image: RasterImage) -> int:
    """Global threshold maximizing between-class variance, exact arithmetic.

    Returns the t in [0, 255] maximizing w0·w1·(µ0 - µ1)² where class 0 is
    values <= t and class 1 is values > t (foreground). Ties break toward the
    smallest t. The scan uses integer cross-multiplication, so the argmax is
    exact. A constant image is degenerate (zero variance everywhere); by
    convention its constant value is returned, which makes the foreground
    empty.
    """
    if image.channels != 1 or not image.is_byte:
        raise InvalidInputError("otsu_threshold expects an 8-bit grayscale image")
    values = image.data
    lo = int(values.min())
    hi = int(values.max())
    if lo == hi:
        return lo
    hist = np.bincount(values.ravel(), minlength=256)
    counts = [int(c) for c in hist]
    total = sum(counts)
    total_sum = sum(v * c for v, c in enumerate(counts))

    # sigma_b^2(t) is proportional to (s0*c1 - s1*c0)^2 / (c0*c1); compare
    # candidates as exact rationals via cross-multiplication.
    best_t = 0
    best_num = -1
    best_den = 1
    c0 = 0
    s0 = 0
    for t in range(256):
        c0 += counts[t]
        s0 += t * counts[t]
        c1 = total - c0
        if c0 == 0 or c1 == 0:
            num, den = 0, 1
        else:
            s1 = total_sum - s0
            num = (s0 * c1 - s1 * c0) ** 2
            den = c0 * c1
        if num * best_den > best_num * den:
            best_num, best_den, best_t = num, den, t
    return best_t


def _dilate(bits: np.ndarray, radius: int) -> np.ndarray:
    if radius == 0 or not bits.any():
        return bits.copy()
    dist = ndimage.distance_transform_edt(~bits)
    return dist <= radius


def _erode(bits: np.ndarray, radius: int) -> np.ndarray:
    if radius == 0:
        return bits.copy()
    if not bits.any():
        return bits.copy()
    padded = np.pad(bits, radius, constant_values=False)
    dist = ndimage.distance_transform_edt(padded)
    return dist[radius:-radius, radius:-radius] > radius


def binary_morph(mask: BinaryMask, op: str, kernel: DiskKernel) -> BinaryMask:
    """Apply a flat disk morphological operator.

    ``op`` is one of erode, dilate, open (erode then dilate), close (dilate
    then erode). Radius 0 is the identity for every operator.
    """
    r = kernel.radius
    bits = mask.bits
    if op == "erode":
        out = _erode(bits, r)
    elif op == "dilate":
        out = _dilate(bits, r)
    elif op == "open":
        out = _dilate(_erode(bits, r), r)
    elif op == "close":
        out = _erode(_dilate(bits, r), r)
    else:
        raise InvalidParameterError(f"unknown morphological op {op!r}")
    return BinaryMask(bits=out, resolution=mask.resolution)
