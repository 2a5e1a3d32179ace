"""Tiled-inference fusion: probability stitching, detection NMS, mask filter.

Model outputs arrive per tile; this module folds them back into the ROI
frame deterministically. Probabilities are averaged where tiles overlap,
duplicate boxes reported by neighboring tiles are removed by greedy NMS with
fully specified tie-breaking, and detections are kept or rejected by a
center-point test against the epithelium mask.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, InvalidParameterError
from .imaging import BinaryMask, Resolution, TileRect


@dataclass(frozen=True)
class ProbabilityTile:
    """One tile of epithelium probabilities in ROI coordinates."""

    rect: TileRect
    values: np.ndarray  # (h, w) float in [0, 1]

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.rect.h, self.rect.w):
            raise InvalidInputError(
                f"values shape {v.shape} does not match rect {self.rect}"
            )
        if v.size and (float(v.min()) < 0.0 or float(v.max()) > 1.0):
            raise InvalidInputError("probabilities must lie in [0, 1]")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class Detection:
    """Axis-aligned candidate mitotic figure in level-0 pixels."""

    x: float
    y: float
    w: float
    h: float
    score: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise InvalidInputError(f"detection must have positive size, got {self}")
        if not (0.0 <= self.score <= 1.0):
            raise InvalidInputError(f"score must lie in [0, 1], got {self.score}")

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    def translated(self, dx: float, dy: float) -> "Detection":
        return Detection(self.x + dx, self.y + dy, self.w, self.h, self.score)


def box_iou(a: Detection, b: Detection) -> float:
    """Intersection-over-union of two boxes; 0 when disjoint."""
    ix = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    iy = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    return inter / (a.w * a.h + b.w * b.h - inter)


def stitch_probabilities(tiles, out_dims: tuple[int, int], threshold: float = 0.5,
                         resolution: Resolution | None = None) -> BinaryMask:
    """Average overlapping probability tiles and threshold into a mask.

    Per pixel the probability is the arithmetic mean over covering tiles
    (uncovered pixels default to probability 0); the mask is
    ``probability >= threshold`` (inclusive). Tiles are accumulated in a
    canonical order (sorted by rect), so the result is exactly invariant
    under permutation of the input list.
    """
    out_w, out_h = out_dims
    if out_w <= 0 or out_h <= 0:
        raise InvalidParameterError(f"out_dims must be positive, got {out_dims}")
    acc = np.zeros((out_h, out_w), dtype=np.float64)
    cover = np.zeros((out_h, out_w), dtype=np.int64)
    for tile in sorted(tiles, key=lambda t: t.rect.sort_key()):
        r = tile.rect
        if r.x + r.w > out_w or r.y + r.h > out_h:
            raise InvalidInputError(f"tile {r} exceeds output dims {out_dims}")
        acc[r.slices] += tile.values
        cover[r.slices] += 1
    prob = np.divide(acc, cover, out=np.zeros_like(acc), where=cover > 0)
    return BinaryMask(bits=prob >= threshold,
                      resolution=resolution or Resolution(1.0))


def fuse_detections(per_tile, iou_threshold: float = 0.5) -> list[Detection]:
    """Translate tile-local boxes to ROI coordinates and dedupe by greedy NMS.

    Candidates are processed by descending score with ties broken by
    ascending (y, x, w, h); a box is kept iff its IoU with every
    previously kept box is < ``iou_threshold``. The returned list is in
    processing order (score descending, then position).
    """
    if not (0.0 < iou_threshold <= 1.0):
        raise InvalidParameterError(f"iou_threshold must lie in (0, 1], got {iou_threshold}")
    candidates: list[Detection] = []
    for rect, dets in per_tile:
        for d in dets:
            candidates.append(d.translated(rect.x, rect.y))
    candidates.sort(key=lambda d: (-d.score, d.y, d.x, d.w, d.h))
    kept: list[Detection] = []
    for d in candidates:
        if all(box_iou(d, k) < iou_threshold for k in kept):
            kept.append(d)
    return kept


def filter_by_mask(dets, mask: BinaryMask, mask_scale: float) -> tuple[list[Detection], list[Detection]]:
    """Partition detections by the mask value at their (scaled) centers.

    A detection is kept iff the mask pixel at ``floor(center * mask_scale)``
    is foreground; centers falling outside the mask are rejected. The
    partition preserves input order and is exhaustive.

    ``mask_scale`` maps detection coordinates to mask coordinates, e.g. 0.5
    when detections live at 0.25 µm/px and the mask at 0.5 µm/px.
    """
    if not (mask_scale > 0 and math.isfinite(mask_scale)):
        raise InvalidParameterError(f"mask_scale must be positive, got {mask_scale!r}")
    kept: list[Detection] = []
    rejected: list[Detection] = []
    bits = mask.bits
    for d in dets:
        cx, cy = d.center
        px = math.floor(cx * mask_scale)
        py = math.floor(cy * mask_scale)
        if 0 <= px < mask.width and 0 <= py < mask.height and bits[py, px]:
            kept.append(d)
        else:
            rejected.append(d)
    return kept, rejected
