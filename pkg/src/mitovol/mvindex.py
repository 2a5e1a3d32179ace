"""The volume-corrected mitotic index and its point-grid estimator.

The index normalizes a mitotic count by the epithelial volume (area)
fraction of the evaluated region and by the region's physical area:

    index = k * MC / Vv,   k = 100 / A

with MC the mitotic count, Vv the epithelium fraction in percent, and A the
region area in mm². At Vv = 100% the index reduces to mitoses per mm². (The
historical microscope form k = 100 / (π r²), with r the field radius in mm,
is superseded by the digital area definition and is not computed here.)

Per-field reporting partitions the ROI into equal-area rectangles; each
field uses the nominal subfield area A/n for its coefficient so field-level
and ROI-level values share per-mm² units. The Weibel estimator simulates
manual point counting: a near-square lattice of points with a sub-pixel
offset, scoring the fraction of points that hit foreground.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass

import numpy as np

from .errors import InconsistentFieldError, InvalidParameterError, UndefinedIndexError
from .imaging import BinaryMask, Resolution, TileRect

# 10 high-power fields at field number 22 mm cover 2.37 mm².
DEFAULT_ROI_AREA_MM2 = 2.37
DEFAULT_N_FIELDS = 10

# Point count matching the manual protocol's grid for a 10-HPF ROI. (Stated
# as equivalent to the 42-point single-HPF grid even though 42*10 = 420.)
DEFAULT_WEIBEL_POINTS = 432


@dataclass(frozen=True)
class RoiSpec:
    """Physical description of the evaluated region."""

    area_mm2: float = DEFAULT_ROI_AREA_MM2
    microns_per_pixel: Resolution = Resolution(0.25)
    n_fields: int = DEFAULT_N_FIELDS

    def __post_init__(self):
        if not (self.area_mm2 > 0 and math.isfinite(self.area_mm2)):
            raise InvalidParameterError(f"area_mm2 must be positive, got {self.area_mm2}")
        if self.n_fields < 1:
            raise InvalidParameterError(f"n_fields must be >= 1, got {self.n_fields}")


@dataclass(frozen=True)
class FieldResult:
    """Per-field mitotic count, epithelium fraction, and index (None if Vv=0)."""

    field_index: int
    mc: int
    vv_percent: float
    mv: float | None


@dataclass(frozen=True)
class MVReport:
    """Aggregate and per-field results of one ROI evaluation."""

    k: float
    area_mm2: float
    mc_total: int
    mc_kept: int
    vv_mean: float
    vv_std: float
    mv_mean: float
    mv_std: float
    mv_whole_roi: float
    det_threshold_used: float
    fields: tuple[FieldResult, ...]

    def __post_init__(self):
        if self.mc_kept > self.mc_total:
            raise InvalidParameterError(
                f"mc_kept ({self.mc_kept}) cannot exceed mc_total ({self.mc_total})"
            )
        if self.vv_std < 0 or self.mv_std < 0:
            raise InvalidParameterError("standard deviations must be >= 0")


@dataclass(frozen=True)
class WeibelGrid:
    """Point-count lattice: point budget plus sub-pixel cell offset."""

    n_points: int = DEFAULT_WEIBEL_POINTS
    offset: tuple[float, float] = (0.5, 0.5)

    def __post_init__(self):
        if self.n_points < 1:
            raise InvalidParameterError(f"n_points must be >= 1, got {self.n_points}")
        dx, dy = self.offset
        if not (0.0 <= dx < 1.0 and 0.0 <= dy < 1.0):
            raise InvalidParameterError(f"offset components must lie in [0, 1), got {self.offset}")


def k_coefficient(area_mm2: float) -> float:
    """Digital field coefficient k = 100 / area (area in mm²)."""
    if not (area_mm2 > 0 and math.isfinite(area_mm2)):
        raise InvalidParameterError(f"area_mm2 must be positive, got {area_mm2!r}")
    return 100.0 / area_mm2


def epithelium_fraction(mask: BinaryMask, region: TileRect) -> float:
    """Foreground percentage of the mask within ``region``."""
    if region.x + region.w > mask.width or region.y + region.h > mask.height:
        raise InvalidParameterError(f"region {region} exceeds mask bounds")
    fg = int(np.count_nonzero(mask.bits[region.slices]))
    return 100.0 * fg / region.area


def mv_index_single(mc: int, vv_percent: float, k: float) -> float:
    """Index for one field: k * MC / Vv, Vv in percent, > 0."""
    if mc < 0:
        raise InvalidParameterError(f"mc must be >= 0, got {mc}")
    if vv_percent <= 0:
        raise UndefinedIndexError(
            f"index undefined for vv_percent={vv_percent} (no epithelium present)"
        )
    return k * mc / vv_percent

def mv_index_fields(fields, k: float) -> float:
    """Index over several fields: k * sum(MC_i / Vv_i).

    Fields with Vv = 0 and MC = 0 are skipped (no epithelium, nothing
    counted); Vv = 0 with MC > 0 signals a mask/detection mismatch and
    raises.
    """
    total = 0.0
    for i, (mc, vv) in enumerate(fields):
        if vv <= 0:
            if mc == 0:
                continue
            raise InconsistentFieldError(
                f"field {i} has {mc} mitoses but no epithelium (vv=0)"
            )
        total += mc / vv
    return k * total


def weibel_points(grid: WeibelGrid, width: int, height: int) -> np.ndarray:
    """Lattice pixel coordinates, shape (n_points, 2) as (x, y).

    Cells are near-square and adapted to the region aspect:
    rows = ceil(sqrt(n·H/W)), cols = ceil(n/rows); the surplus beyond
    ``n_points`` is dropped row-major from the end. Points sit at
    ``(c + dx) * cell_w`` (same for y), rounded ties-to-even and clamped
    in-bounds.
    """
    if width <= 0 or height <= 0:
        raise InvalidParameterError(f"region dims must be positive, got {(width, height)}")
    n = grid.n_points
    rows = max(1, math.ceil(math.sqrt(n * height / width)))
    cols = max(1, math.ceil(n / rows))
    cell_w = width / cols
    cell_h = height / rows
    dx, dy = grid.offset
    cc, rr = np.meshgrid(np.arange(cols), np.arange(rows))
    xs = np.rint((cc.ravel() + dx) * cell_w).astype(np.int64)
    ys = np.rint((rr.ravel() + dy) * cell_h).astype(np.int64)
    xs = np.clip(xs, 0, width - 1)[:n]
    ys = np.clip(ys, 0, height - 1)[:n]
    return np.stack([xs, ys], axis=1)


def weibel_estimate(mask: BinaryMask, grid: WeibelGrid) -> float:
    """Fraction of grid points hitting foreground, in [0, 1]."""
    pts = weibel_points(grid, mask.width, mask.height)
    hits = int(np.count_nonzero(mask.bits[pts[:, 1], pts[:, 0]]))
    return hits / grid.n_points


def field_partition(width: int, height: int, n_fields: int) -> list[TileRect]:
    """Equal-area rectangular partition, row-major field indexing.

    Uses 2 rows x 5 columns for 10 fields; otherwise the most-square
    factorization rows x cols with rows = the largest divisor of n_fields
    not exceeding sqrt(n_fields). Edges land on round(j * dim / cols).
    """
    if n_fields < 1:
        raise InvalidParameterError(f"n_fields must be >= 1, got {n_fields}")
    rows = 1
    for d in range(1, int(math.isqrt(n_fields)) + 1):
        if n_fields % d == 0:
            rows = d
    cols = n_fields // rows
    if width < cols or height < rows:
        raise InvalidParameterError(
            f"region {width}x{height} too small for a {rows}x{cols} partition"
        )
    x_edges = [round(j * width / cols) for j in range(cols + 1)]
    y_edges = [round(i * height / rows) for i in range(rows + 1)]
    rects = []
    for i in range(rows):
        for j in range(cols):
            rects.append(TileRect(x_edges[j], y_edges[i],
                                  x_edges[j + 1] - x_edges[j],
                                  y_edges[i + 1] - y_edges[i]))
    return rects


def _population_std(values) -> float:
    return statistics.pstdev(values) if len(values) > 1 else 0.0


def build_report(mask: BinaryMask, kept_detections, all_detections,
                 roi: RoiSpec, det_threshold: float) -> MVReport:
    """Assemble per-field and whole-ROI results into a report.

    The ROI (mask frame) is partitioned into ``roi.n_fields`` equal-area
    rectangles. Per-field MC counts kept detections whose centers (scaled
    from the detection frame to the mask frame, floor rule) fall in the
    field; per-field Vv uses actual pixel counts while the field coefficient
    uses the nominal area A/n. Aggregates use population standard deviation;
    the whole-ROI index uses the whole-mask Vv, total kept MC, and
    k = 100/A. A whole-ROI Vv of zero makes the index undefined and raises.
    """
    mc_total = len(list(all_detections))
    kept = list(kept_detections)
    mc_kept = len(kept)
    whole = TileRect(0, 0, mask.width, mask.height)
    vv_whole = epithelium_fraction(mask, whole)
    if vv_whole <= 0:
        raise UndefinedIndexError("whole-ROI epithelium fraction is zero; index undefined")

    scale = roi.microns_per_pixel.microns_per_pixel / mask.resolution.microns_per_pixel
    rects = field_partition(mask.width, mask.height, roi.n_fields)
    counts = [0] * len(rects)
    for d in kept:
        cx, cy = d.center
        px = math.floor(cx * scale)
        py = math.floor(cy * scale)
        for i, r in enumerate(rects):
            if r.x <= px < r.x + r.w and r.y <= py < r.y + r.h:
                counts[i] += 1
                break

    k_field = k_coefficient(roi.area_mm2 / roi.n_fields)
    fields = []
    for i, r in enumerate(rects):
        vv = epithelium_fraction(mask, r)
        mc = counts[i]
        if vv > 0:
            mv = mv_index_single(mc, vv, k_field)
        elif mc == 0:
            mv = None
        else:
            raise InconsistentFieldError(
                f"field {i} has {mc} mitoses but no epithelium (vv=0)"
            )
        fields.append(FieldResult(field_index=i, mc=mc, vv_percent=vv, mv=mv))

    vv_values = [f.vv_percent for f in fields]
    mv_values = [f.mv for f in fields if f.mv is not None]
    return MVReport(
        k=k_coefficient(roi.area_mm2),
        area_mm2=roi.area_mm2,
        mc_total=mc_total,
        mc_kept=mc_kept,
        vv_mean=statistics.fmean(vv_values),
        vv_std=_population_std(vv_values),
        mv_mean=statistics.fmean(mv_values) if mv_values else 0.0,
        mv_std=_population_std(mv_values),
        mv_whole_roi=mv_index_single(mc_kept, vv_whole, k_coefficient(roi.area_mm2)),
        det_threshold_used=det_threshold,
        fields=tuple(fields),
    )
