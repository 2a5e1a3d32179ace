"""Segmentation and agreement metrics, plus the TP/FP/FN overlay renderer."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, InvalidParameterError, UndefinedCorrelationError
from .imaging import BinaryMask, RasterImage


@dataclass(frozen=True)
class PairedSeries:
    """Two aligned series of reals (predictions vs references)."""

    predictions: tuple[float, ...]
    references: tuple[float, ...]

    def __post_init__(self):
        preds = tuple(float(v) for v in self.predictions)
        refs = tuple(float(v) for v in self.references)
        if len(preds) == 0 or len(preds) != len(refs):
            raise InvalidInputError(
                f"series must have equal non-zero lengths, got {len(preds)} and {len(refs)}"
            )
        object.__setattr__(self, "predictions", preds)
        object.__setattr__(self, "references", refs)

    def __len__(self) -> int:
        return len(self.predictions)


def _check_dims(pred: BinaryMask, ref: BinaryMask):
    if (pred.width, pred.height) != (ref.width, ref.height):
        raise InvalidInputError(
            f"mask dims differ: {pred.width}x{pred.height} vs {ref.width}x{ref.height}"
        )


def iou(pred: BinaryMask, ref: BinaryMask) -> float:
    """Intersection over union; two empty masks agree vacuously (1.0)."""
    _check_dims(pred, ref)
    inter = int(np.count_nonzero(pred.bits & ref.bits))
    union = int(np.count_nonzero(pred.bits | ref.bits))
    if union == 0:
        return 1.0
    return inter / union


def dice_f1(pred: BinaryMask, ref: BinaryMask) -> float:
    """Dice / pixel-level F1; two empty masks give 1.0."""
    _check_dims(pred, ref)
    inter = int(np.count_nonzero(pred.bits & ref.bits))
    total = int(np.count_nonzero(pred.bits)) + int(np.count_nonzero(ref.bits))
    if total == 0:
        return 1.0
    return 2.0 * inter / total


def mae(series: PairedSeries) -> float:
    """Mean absolute error between predictions and references."""
    p = np.asarray(series.predictions)
    r = np.asarray(series.references)
    return float(np.mean(np.abs(p - r)))


def pearson_r(series: PairedSeries) -> float:
    """Sample correlation coefficient; undefined for constant series."""
    if len(series) < 2:
        raise InvalidParameterError("pearson_r needs at least 2 paired values")
    p = np.asarray(series.predictions)
    r = np.asarray(series.references)
    dp = p - p.mean()
    dr = r - r.mean()
    sp = float(np.dot(dp, dp))
    sr = float(np.dot(dr, dr))
    if sp == 0.0 or sr == 0.0:
        raise UndefinedCorrelationError("correlation undefined for a constant series")
    return float(np.dot(dp, dr)) / (sp * sr) ** 0.5


# Pure-hue tints for the overlay classes.
_TINT_TP = np.array([0, 255, 0], dtype=np.float64)
_TINT_FP = np.array([255, 0, 0], dtype=np.float64)
_TINT_FN = np.array([0, 0, 255], dtype=np.float64)


def render_overlay(image: RasterImage, pred: BinaryMask, ref: BinaryMask) -> RasterImage:
    """Tint TP pixels green, FP red, FN blue at alpha 0.5 over the image.

    True negatives pass through unchanged. Blended values are rounded to the
    nearest byte, ties to even.
    """
    if image.channels != 3 or not image.is_byte:
        raise InvalidInputError("render_overlay expects an 8-bit RGB image")
    if (image.width, image.height) != (pred.width, pred.height):
        raise InvalidInputError("image dims must match the masks")
    _check_dims(pred, ref)
    out = image.data.astype(np.float64)
    for selector, tint in (
        (pred.bits & ref.bits, _TINT_TP),
        (pred.bits & ~ref.bits, _TINT_FP),
        (~pred.bits & ref.bits, _TINT_FN),
    ):
        out[selector] = 0.5 * out[selector] + 0.5 * tint
    return RasterImage(data=np.rint(out).astype(np.uint8), resolution=image.resolution)
