"""Command-line surface: maskgen, mvindex, weibel, eval, overlay.

Exit codes: 0 success, 1 input/validation error, 2 internal invariant
violation. Every error path prints one JSON line {"error": code, "detail":
text} on stderr. Report floats are serialized with 9 significant digits
(round-half-even) and keys in a fixed documented order, so repeated runs are
byte-identical.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import io as mio
from .config import PipelineConfig, load_config, load_maskgen_params, load_stain_matrix
from .errors import InvalidInputError, MitovolError
from .fusion import filter_by_mask, stitch_probabilities
from .imaging import BinaryMask, RasterImage
from .maskgen import NoStainWarning, generate_reference_mask
from .metrics import PairedSeries, dice_f1, iou, mae, pearson_r, render_overlay
from .mvindex import MVReport, RoiSpec, WeibelGrid, build_report, weibel_estimate
from .stain import DEFAULT_HDAB


# ---------------------------------------------------------------------------
# Deterministic JSON with 9-significant-digit floats


def _json_text(value) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".9g")
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_json_text(v) for v in value) + "]"
    if isinstance(value, dict):
        items = (f"{json.dumps(str(k))}: {_json_text(v)}" for k, v in value.items())
        return "{" + ", ".join(items) + "}"
    raise TypeError(f"cannot serialize {type(value)!r}")


def report_to_json(report: MVReport) -> str:
    doc = {
        "k": report.k,
        "area_mm2": report.area_mm2,
        "mc_total": report.mc_total,
        "mc_kept": report.mc_kept,
        "vv_percent_mean": report.vv_mean,
        "vv_percent_std": report.vv_std,
        "mv_mean": report.mv_mean,
        "mv_std": report.mv_std,
        "mv_whole_roi": report.mv_whole_roi,
        "det_threshold": report.det_threshold_used,
        "fields": [
            {"index": f.field_index, "mc": f.mc, "vv_percent": f.vv_percent, "mv": f.mv}
            for f in report.fields
        ],
    }
    return _json_text(doc) + "\n"


def _emit_error(code: str, detail: str):
    print(json.dumps({"error": code, "detail": detail}), file=sys.stderr)


def _emit_warning(code: str, detail: str):
    print(json.dumps({"warning": code, "detail": detail}), file=sys.stderr)


# ---------------------------------------------------------------------------
# Subcommands


def _load_pipeline_config(args) -> PipelineConfig:
    return getattr(args, "_cfg", None) or PipelineConfig()


def cmd_maskgen(args) -> int:
    cfg = _load_pipeline_config(args)
    params = load_maskgen_params(args.params) if args.params else cfg.maskgen
    if args.stains:
        stains = load_stain_matrix(args.stains)
    elif cfg.stains_path:
        stains = load_stain_matrix(cfg.stains_path)
    else:
        stains = DEFAULT_HDAB
    roi = mio.ManifestRoi.open(args.ihc, threads=args.threads)

    caught: list[str] = []
    with warnings.catch_warnings(record=True) as records:
        warnings.simplefilter("always")
        mask = generate_reference_mask(roi, params, stains, threads=args.threads)
        for rec in records:
            if issubclass(rec.category, NoStainWarning):
                caught.append("no_stain_detected")

    out = Path(args.out)
    mio.write_mask_png(mask, out)
    sidecar = {
        "params": dataclasses.asdict(params),
        "stains": [
            {"name": name, "od_rgb": [float(v) for v in row]}
            for name, row in zip(stains.names, stains.vectors)
        ],
        "warnings": sorted(set(caught)),
    }
    sidecar_path = out.with_suffix(".params.json")
    sidecar_path.write_text(_json_text(sidecar) + "\n", "utf-8")
    return 0


def _load_segmentation(args, cfg: PipelineConfig, threads: int) -> BinaryMask:
    seg_path = Path(args.seg)
    if seg_path.suffix.lower() == ".json":
        tiles, dims, resolution = mio.read_probability_tiles(seg_path, threads=threads)
        return stitch_probabilities(tiles, dims, threshold=0.5, resolution=resolution)
    return mio.read_mask(seg_path, cfg.segmentation.microns_per_pixel, threads=threads)


def cmd_mvindex(args) -> int:
    cfg = _load_pipeline_config(args)
    det_threshold = args.det_threshold if args.det_threshold is not None else cfg.det_threshold
    roi_manifest = mio.load_manifest(args.roi)
    det_res = roi_manifest.resolution

    mask = _load_segmentation(args, cfg, args.threads)
    scale = det_res.microns_per_pixel / mask.resolution.microns_per_pixel
    expect_w = round(roi_manifest.width * scale)
    expect_h = round(roi_manifest.height * scale)
    if (mask.width, mask.height) != (expect_w, expect_h):
        raise InvalidInputError(
            f"mask {mask.width}x{mask.height} does not match ROI "
            f"{roi_manifest.width}x{roi_manifest.height} at scale {scale:g} "
            f"(expected {expect_w}x{expect_h})",
            code="resolution_mismatch",
        )

    all_dets = mio.read_detections_jsonl(args.dets)
    thresholded = [d for d in all_dets if d.score >= det_threshold]
    kept, rejected = filter_by_mask(thresholded, mask, scale)

    oob = sum(
        1 for d in rejected
        if not (0 <= d.center[0] * scale < mask.width and 0 <= d.center[1] * scale < mask.height)
    )
    if oob:
        _emit_warning("detections_outside_roi", f"{oob} detection centers fall outside the ROI")

    roi_spec = RoiSpec(area_mm2=cfg.roi.area_mm2, microns_per_pixel=det_res,
                       n_fields=cfg.roi.n_fields)
    report = build_report(mask, kept, thresholded, roi_spec, det_threshold)
    Path(args.out).write_text(report_to_json(report), "utf-8")

    if args.overlay_out:
        image = mio.ManifestRoi.open(args.roi, threads=args.threads).read_full()
        canvas = np.array(image.data)
        for det, color in [(d, (0, 255, 0)) for d in kept] + [(d, (255, 0, 0)) for d in rejected]:
            _draw_box(canvas, det, color)
        mio.write_image_png(RasterImage(data=canvas, resolution=image.resolution),
                            args.overlay_out)
    return 0


def _draw_box(canvas: np.ndarray, det, color, thickness: int = 3):
    h, w = canvas.shape[:2]
    x0 = max(0, int(det.x))
    y0 = max(0, int(det.y))
    x1 = min(w, int(det.x + det.w))
    y1 = min(h, int(det.y + det.h))
    if x1 <= x0 or y1 <= y0:
        return
    t = thickness
    canvas[y0:min(y0 + t, y1), x0:x1] = color
    canvas[max(y1 - t, y0):y1, x0:x1] = color
    canvas[y0:y1, x0:min(x0 + t, x1)] = color
    canvas[y0:y1, max(x1 - t, x0):x1] = color


def cmd_weibel(args) -> int:
    mask = mio.read_mask(args.mask)
    if args.offset is not None:
        parts = args.offset.split(",")
        if len(parts) != 2:
            raise InvalidInputError(f"--offset must be 'dx,dy', got {args.offset!r}")
        offset = (float(parts[0]), float(parts[1]))
    elif args.seed is not None:
        rng = np.random.default_rng(args.seed)
        offset = (float(rng.random()), float(rng.random()))
    else:
        offset = (0.5, 0.5)
    grid = WeibelGrid(n_points=args.points, offset=offset)
    fraction = weibel_estimate(mask, grid)
    doc = {"fraction": fraction, "n_points": grid.n_points, "offset": list(grid.offset)}
    print(_json_text(doc))
    return 0


def _read_series_csv(path) -> dict[str, float]:
    import csv

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != ["id", "value"]:
            raise InvalidInputError(f"{path}: series CSV must have header 'id,value'")
        out: dict[str, float] = {}
        for row in reader:
            if not row:
                continue
            if len(row) != 2:
                raise InvalidInputError(f"{path}: expected 2 columns, got {row!r}")
            key = row[0].strip()
            if key in out:
                raise InvalidInputError(f"{path}: duplicate id {key!r}")
            out[key] = float(row[1])
    return out


def cmd_eval(args) -> int:
    result = {"iou": None, "dice_f1": None, "mae": None, "pearson_r": None}
    if args.pred or args.ref:
        if not (args.pred and args.ref):
            raise InvalidInputError("--pred and --ref must be given together")
        pred = mio.read_mask(args.pred)
        ref = mio.read_mask(args.ref)
        result["iou"] = iou(pred, ref)
        result["dice_f1"] = dice_f1(pred, ref)
    if args.pred_series or args.ref_series:
        if not (args.pred_series and args.ref_series):
            raise InvalidInputError("--pred-series and --ref-series must be given together")
        pred_map = _read_series_csv(args.pred_series)
        ref_map = _read_series_csv(args.ref_series)
        if set(pred_map) != set(ref_map):
            raise InvalidInputError(
                f"series ids differ: {sorted(set(pred_map) ^ set(ref_map))}",
                code="series_mismatch",
            )
        ids = list(pred_map)
        series = PairedSeries(
            predictions=tuple(pred_map[i] for i in ids),
            references=tuple(ref_map[i] for i in ids),
        )
        result["mae"] = mae(series)
        try:
            result["pearson_r"] = pearson_r(series)
        except MitovolError as e:
            _emit_warning(e.code, str(e))
    if all(v is None for v in result.values()):
        raise InvalidInputError("nothing to evaluate: give masks and/or series")
    print(_json_text(result))
    return 0


def cmd_overlay(args) -> int:
    image = mio.read_image_png(args.image)
    pred = mio.read_mask(args.pred)
    ref = mio.read_mask(args.ref)
    out = render_overlay(image, pred, ref)
    mio.write_image_png(out, args.out)
    return 0


# ---------------------------------------------------------------------------
# Parser / entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mitovol",
        description="Volume-corrected mitotic index on histology ROIs",
    )
    parser.add_argument("--config", help="pipeline config JSON")
    parser.add_argument("--threads", type=int, default=1, help="worker threads for tile work")
    parser.add_argument("--seed", type=int, default=None, help="seed for randomized grid offsets")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("maskgen", help="generate the epithelium reference mask from an IHC ROI")
    p.add_argument("--ihc", required=True, help="IHC ROI manifest JSON")
    p.add_argument("--stains", help="stain matrix JSON")
    p.add_argument("--params", help="mask generation params JSON")
    p.add_argument("--out", required=True, help="output mask PNG")
    p.set_defaults(func=cmd_maskgen)

    p = sub.add_parser("mvindex", help="compute the M/V-Index report for one ROI")
    p.add_argument("--roi", required=True, help="ROI manifest JSON (frame and resolution)")
    p.add_argument("--seg", required=True,
                   help="probability-tile manifest JSON or segmentation mask PNG")
    p.add_argument("--dets", required=True, help="detections JSONL")
    p.add_argument("--out", required=True, help="output report JSON")
    p.add_argument("--det-threshold", type=float, default=None,
                   help="score threshold applied before counting (default from config)")
    p.add_argument("--overlay-out", help="optional PNG with kept boxes green, rejected red")
    p.set_defaults(func=cmd_mvindex)

    p = sub.add_parser("weibel", help="point-grid epithelium fraction of a mask")
    p.add_argument("--mask", required=True, help="mask PNG or manifest")
    p.add_argument("--points", type=int, default=432)
    p.add_argument("--offset", help="sub-pixel grid offset 'dx,dy' in [0,1)")
    p.set_defaults(func=cmd_weibel)

    p = sub.add_parser("eval", help="segmentation/agreement metrics")
    p.add_argument("--pred", help="predicted mask PNG or manifest")
    p.add_argument("--ref", help="reference mask PNG or manifest")
    p.add_argument("--pred-series", help="predicted series CSV (header id,value)")
    p.add_argument("--ref-series", help="reference series CSV (header id,value)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("overlay", help="render TP/FP/FN tint overlay")
    p.add_argument("--image", required=True, help="8-bit RGB PNG")
    p.add_argument("--pred", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_overlay)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        # Validate the config up front so typos fail before any work starts.
        args._cfg = load_config(args.config) if args.config else None
        return args.func(args)
    except MitovolError as e:
        _emit_error(e.code, str(e))
        return 1
    except KeyError as e:
        _emit_error("lookup_error", str(e))
        return 1
    except FileNotFoundError as e:
        _emit_error("file_not_found", str(e))
        return 1
    except OSError as e:  # unreadable/corrupt image or file
        _emit_error("unreadable_input", f"{type(e).__name__}: {e}")
        return 1
    except Exception as e:  # pragma: no cover - internal invariant violations
        _emit_error("internal", f"{type(e).__name__}: {e}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
