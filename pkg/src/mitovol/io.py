"""File interchange: ROI manifests, PNG masks and tiles, detections, configs.

Large rasters are exchanged as a directory of PNG tiles plus a JSON
manifest::

    { "width_px": int, "height_px": int, "microns_per_pixel": float,
      "tiles": [ { "x": int, "y": int, "file": "relative/path.png" }, ... ] }

Image tiles are 8-bit RGB; mask tiles are 8-bit grayscale with background 0
and foreground 255; probability tiles are 16-bit grayscale with
value / 65535 = probability. Small masks may be a single PNG. Detections
travel as JSON Lines with keys x, y, w, h, score in level-0 ROI pixels.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import InvalidInputError, ManifestError
from .fusion import Detection, ProbabilityTile
from .imaging import BinaryMask, RasterImage, Resolution, TileRect, downsample_image

_MANIFEST_KEYS = {"width_px", "height_px", "microns_per_pixel", "tiles"}
_TILE_KEYS = {"x", "y", "file"}
_DETECTION_KEYS = {"x", "y", "w", "h", "score"}


# ---------------------------------------------------------------------------
# PNG primitives


def write_image_png(image: RasterImage, path):
    arr = image.data if image.is_byte else np.rint(image.data * 255.0).astype(np.uint8)
    Image.fromarray(arr).save(str(path))


def read_image_png(path, microns_per_pixel: float = 1.0) -> RasterImage:
    with Image.open(str(path)) as im:
        arr = np.array(im.convert("RGB") if im.mode not in ("L", "RGB") else im)
    return RasterImage(data=arr, resolution=Resolution(microns_per_pixel))


def write_mask_png(mask: BinaryMask, path):
    Image.fromarray(np.where(mask.bits, 255, 0).astype(np.uint8)).save(str(path))


def read_mask_png(path, microns_per_pixel: float = 1.0) -> BinaryMask:
    with Image.open(str(path)) as im:
        arr = np.array(im.convert("L"))
    return BinaryMask(bits=arr != 0, resolution=Resolution(microns_per_pixel))


def write_probability_png(values: np.ndarray, path):
    """Quantize unit-interval probabilities to 16-bit gray (ties to even)."""
    v = np.asarray(values, dtype=np.float64)
    if v.size and (v.min() < 0.0 or v.max() > 1.0):
        raise InvalidInputError("probabilities must lie in [0, 1]")
    Image.fromarray(np.rint(v * 65535.0).astype(np.uint16)).save(str(path))


def read_probability_png(path) -> np.ndarray:
    with Image.open(str(path)) as im:
        arr = np.array(im)
    if arr.dtype == np.uint8:  # tolerate 8-bit probability tiles
        return arr.astype(np.float64) / 255.0
    return arr.astype(np.float64) / 65535.0


# ---------------------------------------------------------------------------
# Manifests


@dataclass(frozen=True)
class Manifest:
    width: int
    height: int
    resolution: Resolution
    tiles: tuple[tuple[int, int, Path], ...]  # (x, y, absolute file path)


def load_manifest(path) -> Manifest:
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"manifest not found: {path}", code="manifest_not_found")
    try:
        doc = json.loads(path.read_text("utf-8"))
    except json.JSONDecodeError as e:
        raise ManifestError(f"manifest {path} is not valid JSON: {e}") from e
    if not isinstance(doc, dict) or set(doc) != _MANIFEST_KEYS:
        raise ManifestError(
            f"manifest {path} must have exactly keys {sorted(_MANIFEST_KEYS)}"
        )
    width = int(doc["width_px"])
    height = int(doc["height_px"])
    if width <= 0 or height <= 0:
        raise ManifestError(f"manifest {path} has non-positive dimensions")
    tiles = []
    for entry in doc["tiles"]:
        if not isinstance(entry, dict) or set(entry) != _TILE_KEYS:
            raise ManifestError(f"tile entries must have exactly keys {sorted(_TILE_KEYS)}")
        tiles.append((int(entry["x"]), int(entry["y"]), path.parent / entry["file"]))
    return Manifest(width=width, height=height,
                    resolution=Resolution(float(doc["microns_per_pixel"])),
                    tiles=tuple(tiles))


def write_manifest(path, width: int, height: int, microns_per_pixel: float, tiles):
    """Write a manifest; ``tiles`` is an iterable of (x, y, relative_file)."""
    doc = {
        "width_px": int(width),
        "height_px": int(height),
        "microns_per_pixel": float(microns_per_pixel),
        "tiles": [{"x": int(x), "y": int(y), "file": str(f)} for x, y, f in tiles],
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", "utf-8")


class ManifestRoi:
    """Random-access RGB ROI backed by a tile manifest.

    Tiles are decoded lazily; overlapping tiles overwrite in manifest order;
    uncovered pixels read as white (bright-field background). A manifest with
    an empty tile list still exposes dimensions and resolution, but reading
    pixels from it raises.
    """

    def __init__(self, manifest: Manifest, threads: int = 1):
        self._manifest = manifest
        self._threads = max(1, threads)
        self._full: np.ndarray | None = None

    @classmethod
    def open(cls, path, threads: int = 1) -> "ManifestRoi":
        return cls(load_manifest(path), threads=threads)

    @property
    def width(self) -> int:
        return self._manifest.width

    @property
    def height(self) -> int:
        return self._manifest.height

    @property
    def resolution(self) -> Resolution:
        return self._manifest.resolution

    def _assemble(self) -> np.ndarray:
        if self._full is None:
            if not self._manifest.tiles:
                raise ManifestError("manifest lists no tiles; pixel data unavailable")
            canvas = np.full((self.height, self.width, 3), 255, dtype=np.uint8)

            def decode(entry):
                x, y, file = entry
                with Image.open(str(file)) as im:
                    return x, y, np.array(im.convert("RGB"))

            if self._threads > 1 and len(self._manifest.tiles) > 1:
                with ThreadPoolExecutor(max_workers=self._threads) as pool:
                    decoded = list(pool.map(decode, self._manifest.tiles))
            else:
                decoded = [decode(t) for t in self._manifest.tiles]
            for x, y, arr in decoded:
                h, w = arr.shape[:2]
                if x < 0 or y < 0 or x + w > self.width or y + h > self.height:
                    raise ManifestError(f"tile at ({x}, {y}) size {w}x{h} exceeds ROI bounds")
                canvas[y:y + h, x:x + w] = arr
            self._full = canvas
        return self._full

    def read_full(self) -> RasterImage:
        return RasterImage(data=self._assemble(), resolution=self.resolution)

    def read_region(self, rect: TileRect) -> RasterImage:
        full = self._assemble()
        return RasterImage(data=full[rect.slices].copy(), resolution=self.resolution)

    def read_lowres(self, target_microns_per_pixel: float) -> RasterImage:
        factor = target_microns_per_pixel / self.resolution.microns_per_pixel
        return downsample_image(self.read_full(), factor)


class InMemoryRoi:
    """ROI protocol over an in-memory RGB image (tests, demos, small inputs)."""

    def __init__(self, image: RasterImage):
        if image.channels != 3 or not image.is_byte:
            raise InvalidInputError("InMemoryRoi expects an 8-bit RGB image")
        self._image = image

    @property
    def width(self) -> int:
        return self._image.width

    @property
    def height(self) -> int:
        return self._image.height

    @property
    def resolution(self) -> Resolution:
        return self._image.resolution

    def read_full(self) -> RasterImage:
        return self._image

    def read_region(self, rect: TileRect) -> RasterImage:
        return RasterImage(data=self._image.data[rect.slices].copy(),
                           resolution=self.resolution)

    def read_lowres(self, target_microns_per_pixel: float) -> RasterImage:
        factor = target_microns_per_pixel / self.resolution.microns_per_pixel
        return downsample_image(self._image, factor)


def read_mask(path, microns_per_pixel: float = 1.0, threads: int = 1) -> BinaryMask:
    """Read a mask from a single PNG or a grayscale tile manifest."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        manifest = load_manifest(path)
        canvas = np.zeros((manifest.height, manifest.width), dtype=bool)

        def decode(entry):
            x, y, file = entry
            with Image.open(str(file)) as im:
                return x, y, np.array(im.convert("L")) != 0

        if threads > 1 and len(manifest.tiles) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                decoded = list(pool.map(decode, manifest.tiles))
        else:
            decoded = [decode(t) for t in manifest.tiles]
        for x, y, bits in sorted(decoded, key=lambda e: (e[1], e[0])):
            h, w = bits.shape
            if x < 0 or y < 0 or x + w > manifest.width or y + h > manifest.height:
                raise ManifestError(f"mask tile at ({x}, {y}) size {w}x{h} exceeds bounds")
            canvas[y:y + h, x:x + w] |= bits
        return BinaryMask(bits=canvas, resolution=manifest.resolution)
    return read_mask_png(path, microns_per_pixel)


def read_probability_tiles(path, threads: int = 1):
    """Load a probability-tile manifest.

    Returns (tiles, (width, height), resolution) where tiles are
    :class:`ProbabilityTile` in manifest order.
    """
    manifest = load_manifest(path)

    def decode(entry):
        x, y, file = entry
        values = read_probability_png(file)
        h, w = values.shape
        return ProbabilityTile(rect=TileRect(x, y, w, h), values=values)

    if threads > 1 and len(manifest.tiles) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            tiles = list(pool.map(decode, manifest.tiles))
    else:
        tiles = [decode(t) for t in manifest.tiles]
    return tiles, (manifest.width, manifest.height), manifest.resolution


# ---------------------------------------------------------------------------
# Detections


def read_detections_jsonl(path) -> list[Detection]:
    dets = []
    text = Path(path).read_text("utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise InvalidInputError(f"{path}:{lineno}: invalid JSON: {e}") from e
        if not isinstance(obj, dict) or set(obj) != _DETECTION_KEYS:
            raise InvalidInputError(
                f"{path}:{lineno}: detections need exactly keys {sorted(_DETECTION_KEYS)}"
            )
        dets.append(Detection(x=float(obj["x"]), y=float(obj["y"]),
                              w=float(obj["w"]), h=float(obj["h"]),
                              score=float(obj["score"])))
    return dets


def write_detections_jsonl(dets, path):
    lines = [
        json.dumps({"x": d.x, "y": d.y, "w": d.w, "h": d.h, "score": d.score})
        for d in dets
    ]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), "utf-8")
