"""Annotation-free epithelium reference-mask generation from IHC images.

The pipeline mirrors the two-stage flow: a coarse low-resolution chromogen
map picks out candidate tiles (those with enough positive signal), and only
those tiles are refined at full resolution. Refined tiles are stitched by
logical OR, which is deliberately recall-oriented: the mask absorbs small
registration errors rather than clipping epithelium.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError
from .imaging import BinaryMask, RasterImage, TileGrid, TileRect, make_tile_grid, to_byte
from .morphology import DiskKernel, binary_morph, gaussian_blur, otsu_threshold
from .stain import DEFAULT_HDAB, StainMatrix, deconvolve, extract_channel, rgb_to_od


class NoStainWarning(UserWarning):
    """Raised when an input yields no chromogen signal (blank slide)."""


@dataclass(frozen=True)
class MaskGenParams:
    """Tuning constants of the reference-mask pipeline.

    ``min_tile_fraction`` is the fraction of positive low-res pixels a tile
    needs to be refined at full resolution. Radii are in full-resolution
    pixels; the closing radius is rescaled automatically for the low-res map.
    """

    lowres_microns_per_pixel: float = 8.0
    blur_sigma_px: float = 2.0
    min_tile_fraction: float = 0.05
    fullres_threshold: float = 0.15
    open_radius_px: int = 4
    close_radius_px: int = 30
    tile_size: int = 1024
    overlap: int = 128

    def __post_init__(self):
        if not (0 < self.min_tile_fraction < 1):
            raise InvalidParameterError(
                f"min_tile_fraction must lie in (0, 1), got {self.min_tile_fraction}"
            )
        if not (0 < self.fullres_threshold < 1):
            raise InvalidParameterError(
                f"fullres_threshold must lie in (0, 1), got {self.fullres_threshold}"
            )
        if self.open_radius_px < 0 or self.close_radius_px < 0:
            raise InvalidParameterError("morphology radii must be >= 0")
        if self.lowres_microns_per_pixel <= 0:
            raise InvalidParameterError("lowres_microns_per_pixel must be positive")
        if self.blur_sigma_px < 0:
            raise InvalidParameterError("blur_sigma_px must be >= 0")
        if self.tile_size <= 0 or not (0 <= self.overlap < self.tile_size):
            raise InvalidParameterError("tile_size/overlap invalid")


def _chromogen_name(stains: StainMatrix) -> str:
    for name in stains.names:
        if name.lower() == "dab":
            return name
    return stains.names[-1]


def _chromogen_gray(image: RasterImage, stains: StainMatrix) -> RasterImage:
    od = rgb_to_od(image)
    conc = deconvolve(od, stains)
    return extract_channel(conc, _chromogen_name(stains))


def build_ihc_map(ihc_lowres: RasterImage, params: MaskGenParams, stains: StainMatrix,
                  fullres_microns_per_pixel: float = 0.25) -> BinaryMask:
    """Low-resolution chromogen map: deconvolve, blur, Otsu, close.

    The blurred channel is quantized to bytes (rint(v*255)) for Otsu;
    foreground is strictly above the threshold. The closing radius is the
    full-resolution radius rescaled to the low-res grid,
    max(1, round(close_radius_px * fullres_mpp / lowres_mpp)).

    A constant blurred channel makes Otsu degenerate; the map then falls
    back to the fixed unit-float threshold so a saturated slide maps to full
    foreground and a blank one to empty. An empty result raises
    :class:`NoStainWarning` (warning, not error).
    """
    gray = _chromogen_gray(ihc_lowres, stains)
    blurred = gaussian_blur(gray, params.blur_sigma_px)
    byte_img = to_byte(blurred)
    values = byte_img.data
    if int(values.min()) == int(values.max()):
        # Constant channel: Otsu is degenerate and there are no interruptions
        # to close, so decide directly against the fixed threshold.
        fg_value = blurred.data.flat[0] >= params.fullres_threshold
        mask = BinaryMask(bits=np.full(values.shape, bool(fg_value), dtype=bool),
                          resolution=ihc_lowres.resolution)
    else:
        t = otsu_threshold(byte_img)
        mask = BinaryMask(bits=values > t, resolution=ihc_lowres.resolution)
        radius = max(1, round(params.close_radius_px * fullres_microns_per_pixel
                              / params.lowres_microns_per_pixel))
        mask = binary_morph(mask, "close", DiskKernel(radius))
    if mask.foreground_count() == 0:
        warnings.warn("no chromogen signal detected; map is empty", NoStainWarning, stacklevel=2)
    return mask


def _selected_indices(ihc_map: BinaryMask, tiles, min_fraction: float) -> list[int]:
    bits = ihc_map.bits
    picked = []
    for i, rect in enumerate(tiles):
        fg = int(np.count_nonzero(bits[rect.slices]))
        if fg / rect.area >= min_fraction:
            picked.append(i)
    return picked


def select_patches(ihc_map: BinaryMask, grid: TileGrid, min_fraction: float) -> list[TileRect]:
    """Tiles whose foreground fraction in the map reaches ``min_fraction``.

    Grid tiles must already be expressed in map coordinates; order is
    preserved from the grid.
    """
    if not (0 < min_fraction < 1):
        raise InvalidParameterError(f"min_fraction must lie in (0, 1), got {min_fraction}")
    return [grid.tiles[i] for i in _selected_indices(ihc_map, grid.tiles, min_fraction)]


def refine_patch(patch: RasterImage, params: MaskGenParams, stains: StainMatrix) -> BinaryMask:
    """Full-resolution refinement: deconvolve, fixed threshold, open, close.

    Foreground is chromogen channel >= fullres_threshold (inclusive);
    opening removes isolated stain noise, closing bridges small gaps inside
    epithelial regions.
    """
    gray = _chromogen_gray(patch, stains)
    bits = gray.data >= params.fullres_threshold
    mask = BinaryMask(bits=bits, resolution=patch.resolution)
    mask = binary_morph(mask, "open", DiskKernel(params.open_radius_px))
    mask = binary_morph(mask, "close", DiskKernel(params.close_radius_px))
    return mask


def _project_rect(rect: TileRect, scale: float, map_w: int, map_h: int) -> TileRect:
    # Covering rectangle of a full-res tile on the low-res map grid.
    x0 = min(map_w - 1, math.floor(rect.x * scale))
    y0 = min(map_h - 1, math.floor(rect.y * scale))
    x1 = max(x0 + 1, min(map_w, math.ceil((rect.x + rect.w) * scale)))
    y1 = max(y0 + 1, min(map_h, math.ceil((rect.y + rect.h) * scale)))
    return TileRect(x0, y0, x1 - x0, y1 - y0)


def generate_reference_mask(roi, params: MaskGenParams | None = None,
                            stains: StainMatrix | None = None,
                            threads: int = 1) -> BinaryMask:
    """Run the full reference-mask pipeline over a manifest-backed ROI.

    ``roi`` must expose ``width``, ``height``, ``resolution``,
    ``read_lowres(target_mpp)`` and ``read_region(rect)`` (see
    :mod:`mitovol.io`). Selected tiles are refined independently (optionally
    in a thread pool) and OR-stitched, so the output is identical for any
    evaluation order or thread count. Unselected tiles contribute
    background.
    """
    params = params or MaskGenParams()
    stains = stains or DEFAULT_HDAB
    lowres = roi.read_lowres(params.lowres_microns_per_pixel)
    fullres_mpp = roi.resolution.microns_per_pixel
    ihc_map = build_ihc_map(lowres, params, stains, fullres_microns_per_pixel=fullres_mpp)

    grid = make_tile_grid((roi.width, roi.height), params.tile_size, params.overlap)
    scale = fullres_mpp / lowres.resolution.microns_per_pixel
    projected = [_project_rect(r, scale, ihc_map.width, ihc_map.height) for r in grid.tiles]
    picked = _selected_indices(ihc_map, projected, params.min_tile_fraction)

    out = np.zeros((roi.height, roi.width), dtype=bool)

    def refine(i: int) -> tuple[int, np.ndarray]:
        rect = grid.tiles[i]
        return i, refine_patch(roi.read_region(rect), params, stains).bits

    if threads > 1 and len(picked) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(refine, picked))
    else:
        results = [refine(i) for i in picked]
    # OR is associative and commutative; assemble in index order regardless.
    for i, bits in sorted(results, key=lambda item: item[0]):
        out[grid.tiles[i].slices] |= bits
    return BinaryMask(bits=out, resolution=roi.resolution)
