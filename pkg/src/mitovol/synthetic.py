"""Synthetic inputs with known ground truth for tests and demos.

Phantoms are built by running the stain model forward: pick concentrations,
mix them through the stain matrix into optical densities, exponentiate back
to transmitted RGB. The generating mask is then an exact reference for the
recovery pipeline.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidParameterError
from .imaging import BinaryMask, RasterImage, Resolution
from .stain import DEFAULT_HDAB, StainMatrix


def disks_mask(width: int, height: int, disks, microns_per_pixel: float = 0.25) -> BinaryMask:
    """Union of disks given as (cx, cy, radius) triples."""
    yy, xx = np.mgrid[0:height, 0:width]
    bits = np.zeros((height, width), dtype=bool)
    for cx, cy, r in disks:
        bits |= (xx - cx) ** 2 + (yy - cy) ** 2 <= r * r
    return BinaryMask(bits=bits, resolution=Resolution(microns_per_pixel))


def stain_image_from_mask(mask: BinaryMask, concentration: float = 1.0,
                          stains: StainMatrix = DEFAULT_HDAB,
                          stain_name: str = "dab",
                          background: int = 255) -> RasterImage:
    """Render a bright-field RGB image with ``concentration`` of one stain on
    the mask foreground and clean background elsewhere."""
    vec = stains.vectors[stains.index_of(stain_name)]
    od = np.zeros((mask.height, mask.width, 3), dtype=np.float64)
    od[mask.bits] = concentration * vec
    rgb = np.rint(background * np.power(10.0, -od)).astype(np.uint8)
    return RasterImage(data=rgb, resolution=mask.resolution)


def dab_blob_phantom(width: int, height: int, rng: np.random.Generator,
                     n_blobs: int = 3, radius_range=(280, 400),
                     margin: int = 40, concentration: float = 1.0,
                     microns_per_pixel: float = 0.25) -> tuple[RasterImage, BinaryMask]:
    """Random DAB-stained blob phantom plus its exact ground-truth mask.

    Blob radii default to a range large enough that any 1024-px tile
    overlapping a blob sees well over 5% foreground, so patch selection
    cannot drop them.
    """
    if n_blobs < 1:
        raise InvalidParameterError("need at least one blob")
    lo, hi = radius_range
    disks = []
    for _ in range(n_blobs):
        r = int(rng.integers(lo, hi + 1))
        cx = int(rng.integers(margin + r, width - margin - r))
        cy = int(rng.integers(margin + r, height - margin - r))
        disks.append((cx, cy, r))
    truth = disks_mask(width, height, disks, microns_per_pixel)
    image = stain_image_from_mask(truth, concentration=concentration)
    return image, truth


def left_fraction_mask(width: int, height: int, fraction: float,
                       microns_per_pixel: float = 1.0) -> BinaryMask:
    """Mask whose left ``fraction`` of columns is foreground (exact split)."""
    split = round(width * fraction)
    bits = np.zeros((height, width), dtype=bool)
    bits[:, :split] = True
    return BinaryMask(bits=bits, resolution=Resolution(microns_per_pixel))


def scattered_fraction_mask(width: int, height: int, fraction: float,
                            rng: np.random.Generator,
                            microns_per_pixel: float = 1.0) -> BinaryMask:
    """Homogeneous random mask with an exact foreground pixel count."""
    n = width * height
    k = round(n * fraction)
    flat = np.zeros(n, dtype=bool)
    flat[rng.permutation(n)[:k]] = True
    return BinaryMask(bits=flat.reshape(height, width),
                      resolution=Resolution(microns_per_pixel))
