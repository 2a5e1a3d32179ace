"""Raster containers, physical-unit bookkeeping, tiling, and mask transfer.

Images and masks are thin immutable wrappers around numpy arrays plus the
physical pixel size in microns per pixel. All operations here are pure: tile
grids are deterministic for fixed inputs, resampling is nearest-neighbor so
masks stay binary, and affine transfer uses inverse mapping so warped masks
have no holes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, InvalidParameterError, InvalidTransformError


def _readonly(arr: np.ndarray) -> np.ndarray:
    view = arr.view()
    view.flags.writeable = False
    return view


@dataclass(frozen=True)
class Resolution:
    """Physical pixel size, strictly positive and finite, in µm/px."""

    microns_per_pixel: float

    def __post_init__(self):
        mpp = self.microns_per_pixel
        if not (isinstance(mpp, (int, float)) and math.isfinite(mpp) and mpp > 0):
            raise InvalidParameterError(
                f"microns_per_pixel must be positive and finite, got {mpp!r}"
            )
        object.__setattr__(self, "microns_per_pixel", float(mpp))

    def rescaled(self, factor: float) -> "Resolution":
        """Resolution after scaling pixel counts by ``factor`` (µm/px divides)."""
        return Resolution(self.microns_per_pixel / factor)


@dataclass(frozen=True)
class RasterImage:
    """2-D pixel grid: ``(h, w)`` grayscale or ``(h, w, 3)`` RGB.

    ``uint8`` arrays are byte images; floating arrays are unit-interval
    images and are validated to lie in [0, 1]. The wrapped array is
    marked read-only.
    """

    data: np.ndarray
    resolution: Resolution

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim == 2:
            pass
        elif data.ndim == 3 and data.shape[2] == 3:
            pass
        else:
            raise InvalidInputError(
                f"image must be (h, w) or (h, w, 3), got shape {data.shape}"
            )
        if data.dtype == np.uint8:
            pass
        elif np.issubdtype(data.dtype, np.floating):
            data = data.astype(np.float64, copy=False)
            if data.size and (float(data.min()) < 0.0 or float(data.max()) > 1.0):
                raise InvalidInputError("unit-float image values must lie in [0, 1]")
        else:
            raise InvalidInputError(f"unsupported image dtype {data.dtype}")
        if data.shape[0] == 0 or data.shape[1] == 0:
            raise InvalidInputError("image must be non-empty")
        object.__setattr__(self, "data", _readonly(data))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return 1 if self.data.ndim == 2 else 3

    @property
    def is_byte(self) -> bool:
        return self.data.dtype == np.uint8


@dataclass(frozen=True)
class BinaryMask:
    """2-D boolean grid; ``True`` is foreground (epithelium)."""

    bits: np.ndarray
    resolution: Resolution

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim != 2:
            raise InvalidInputError(f"mask must be 2-D, got shape {bits.shape}")
        if bits.shape[0] == 0 or bits.shape[1] == 0:
            raise InvalidInputError("mask must be non-empty")
        if bits.dtype != np.bool_:
            if not (np.issubdtype(bits.dtype, np.integer) or bits.dtype == np.uint8):
                raise InvalidInputError(f"mask dtype must be boolean, got {bits.dtype}")
            bits = bits.astype(bool)
        object.__setattr__(self, "bits", _readonly(bits))

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    def foreground_count(self) -> int:
        return int(np.count_nonzero(self.bits))


@dataclass(frozen=True)
class TileRect:
    """Axis-aligned window, top-left (x, y), size (w, h), in pixels."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise InvalidParameterError(f"tile must have positive size, got {self}")
        if self.x < 0 or self.y < 0:
            raise InvalidParameterError(f"tile origin must be non-negative, got {self}")

    @property
    def area(self) -> int:
        return self.w * self.h

    @property
    def slices(self) -> tuple[slice, slice]:
        """(row, column) slices for indexing ``(h, w)`` arrays."""
        return slice(self.y, self.y + self.h), slice(self.x, self.x + self.w)

    def sort_key(self) -> tuple[int, int, int, int]:
        return (self.y, self.x, self.h, self.w)


@dataclass(frozen=True)
class TileGrid:
    """Ordered, row-major set of overlapping windows covering an image."""

    tiles: tuple[TileRect, ...]
    tile_size: int
    overlap: int
    image_dims: tuple[int, int]  # (width, height)


def _axis_positions(dim: int, tile: int, stride: int) -> list[int]:
    # Advance by stride; clamp the final position so every tile holds real
    # pixels; duplicates collapse when the clamped position repeats.
    positions = []
    pos = 0
    while True:
        if pos + tile > dim:
            pos = dim - tile
        if not positions or positions[-1] != pos:
            positions.append(pos)
        if pos + tile >= dim:
            break
        pos += stride
    return positions


def make_tile_grid(image_dims: tuple[int, int], tile_size: int, overlap: int) -> TileGrid:
    """Build the deterministic overlapping tile grid for an image.

    Parameters
    ----------
    image_dims : (width, height) in pixels, both positive.
    tile_size : tile edge length; must exceed ``overlap``.
    overlap : pixels shared between adjacent tiles, >= 0.

    Tiles advance by ``tile_size - overlap`` per axis; the final position per
    axis is clamped to ``dim - tile_size`` so no tile leaves the image. An
    axis smaller than ``tile_size`` yields a single full-width (or -height)
    tile. Ordering is row-major by (y, x).
    """
    width, height = image_dims
    if tile_size <= 0:
        raise InvalidParameterError(f"tile_size must be positive, got {tile_size}")
    if overlap < 0 or overlap >= tile_size:
        raise InvalidParameterError(
            f"overlap must satisfy 0 <= overlap < tile_size, got {overlap}"
        )
    if width <= 0 or height <= 0:
        raise InvalidParameterError(f"image_dims must be positive, got {image_dims}")

    stride = tile_size - overlap
    xs = [0] if width < tile_size else _axis_positions(width, tile_size, stride)
    ys = [0] if height < tile_size else _axis_positions(height, tile_size, stride)
    tw = min(tile_size, width)
    th = min(tile_size, height)
    tiles = tuple(TileRect(x, y, tw, th) for y in ys for x in xs)
    return TileGrid(tiles=tiles, tile_size=tile_size, overlap=overlap, image_dims=(width, height))


def resample_mask(mask: BinaryMask, factor: float) -> BinaryMask:
    """Nearest-neighbor rescale of a mask by ``factor``.

    Output dims are ``floor(dim * factor + 0.5)`` per axis; each output pixel
    samples source index ``floor(i / factor)``. Nearest-neighbor keeps the
    mask binary. Output µm/px is the input µm/px divided by ``factor``.
    """
    if not (factor > 0 and math.isfinite(factor)):
        raise InvalidParameterError(f"factor must be positive, got {factor!r}")
    out_w = int(mask.width * factor + 0.5)
    out_h = int(mask.height * factor + 0.5)
    if out_w == 0 or out_h == 0:
        raise InvalidParameterError(
            f"factor {factor} yields empty output for {mask.width}x{mask.height} mask"
        )
    xs = np.minimum((np.arange(out_w) / factor).astype(np.int64), mask.width - 1)
    ys = np.minimum((np.arange(out_h) / factor).astype(np.int64), mask.height - 1)
    bits = mask.bits[np.ix_(ys, xs)]
    return BinaryMask(bits=bits, resolution=mask.resolution.rescaled(factor))


@dataclass(frozen=True)
class AffineTransform:
    """3x3 homogeneous matrix mapping source pixel coords to destination.

    The last row must be exactly (0, 0, 1) and the upper-left 2x2 block must
    be nonsingular.
    """

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.shape != (3, 3):
            raise InvalidTransformError(f"matrix must be 3x3, got shape {m.shape}")
        if not (m[2, 0] == 0.0 and m[2, 1] == 0.0 and m[2, 2] == 1.0):
            raise InvalidTransformError("last row must be (0, 0, 1)")
        if abs(float(np.linalg.det(m[:2, :2]))) < 1e-12:
            raise InvalidTransformError("upper-left 2x2 block is singular")
        object.__setattr__(self, "matrix", _readonly(m))

    @classmethod
    def identity(cls) -> "AffineTransform":
        return cls(np.eye(3))

    @classmethod
    def translation(cls, dx: float, dy: float) -> "AffineTransform":
        m = np.eye(3)
        m[0, 2] = dx
        m[1, 2] = dy
        return cls(m)

    def inverse(self) -> "AffineTransform":
        return AffineTransform(np.linalg.inv(self.matrix))


def apply_affine(mask: BinaryMask, t: AffineTransform, out_dims: tuple[int, int]) -> BinaryMask:
    """Warp a mask into a destination frame by inverse nearest-neighbor mapping.

    Each destination pixel p is foreground iff the source mask at
    ``rint(t⁻¹ · p)`` is in bounds and foreground; out-of-range reads are
    background. Ties in rounding go to even (np.rint).
    """
    out_w, out_h = out_dims
    if out_w <= 0 or out_h <= 0:
        raise InvalidParameterError(f"out_dims must be positive, got {out_dims}")
    inv = t.inverse().matrix
    xs = np.arange(out_w, dtype=np.float64)
    ys = np.arange(out_h, dtype=np.float64)
    gx, gy = np.meshgrid(xs, ys)
    sx = np.rint(inv[0, 0] * gx + inv[0, 1] * gy + inv[0, 2]).astype(np.int64)
    sy = np.rint(inv[1, 0] * gx + inv[1, 1] * gy + inv[1, 2]).astype(np.int64)
    valid = (sx >= 0) & (sx < mask.width) & (sy >= 0) & (sy < mask.height)
    bits = np.zeros((out_h, out_w), dtype=bool)
    bits[valid] = mask.bits[sy[valid], sx[valid]]
    return BinaryMask(bits=bits, resolution=mask.resolution)


def to_byte(image: RasterImage) -> RasterImage:
    """Quantize a unit-float image to bytes: ``rint(v * 255)``, ties to even."""
    if image.is_byte:
        return image
    data = np.rint(image.data * 255.0).astype(np.uint8)
    return RasterImage(data=data, resolution=image.resolution)


def downsample_image(image: RasterImage, factor: float) -> RasterImage:
    """Shrink an image by ``factor`` (> 1 shrinks; output µm/px multiplies).

    Integer factors use block means (ragged trailing blocks average over the
    pixels they actually contain); non-integer factors fall back to
    nearest-neighbor at block centers. Byte images round ties-to-even.
    """
    if not (factor > 0 and math.isfinite(factor)):
        raise InvalidParameterError(f"factor must be positive, got {factor!r}")
    if factor == 1.0:
        return image
    data = image.data
    if float(factor).is_integer():
        f = int(factor)
        out_h = max(1, (image.height + f - 1) // f)
        out_w = max(1, (image.width + f - 1) // f)
        row_idx = np.arange(0, image.height, f)
        col_idx = np.arange(0, image.width, f)
        acc = data.astype(np.float64)
        acc = np.add.reduceat(acc, row_idx, axis=0)
        acc = np.add.reduceat(acc, col_idx, axis=1)
        row_n = np.diff(np.append(row_idx, image.height)).astype(np.float64)
        col_n = np.diff(np.append(col_idx, image.width)).astype(np.float64)
        counts = np.outer(row_n, col_n)
        if data.ndim == 3:
            counts = counts[:, :, None]
        mean = acc / counts
        out = np.rint(mean).astype(np.uint8) if image.is_byte else mean
        assert out.shape[:2] == (out_h, out_w)
    else:
        out_h = max(1, int(image.height / factor + 0.5))
        out_w = max(1, int(image.width / factor + 0.5))
        ys = np.minimum((np.arange(out_h) * factor + factor / 2).astype(np.int64), image.height - 1)
        xs = np.minimum((np.arange(out_w) * factor + factor / 2).astype(np.int64), image.width - 1)
        out = data[np.ix_(ys, xs)]
    return RasterImage(data=out, resolution=Resolution(image.resolution.microns_per_pixel * factor))
