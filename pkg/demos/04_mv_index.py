"""End-to-end M/V-Index on a synthetic ROI, library and CLI route.

Builds a half-epithelium mask and a set of detections, filters them through
the mask, assembles the per-field report, then reruns the same inputs
through the command-line interface and prints the report JSON.
"""

import json
import subprocess
import sys
from pathlib import Path

import numpy as np

from mitovol import Detection, Resolution, RoiSpec, build_report, filter_by_mask
from mitovol.cli import report_to_json
from mitovol.imaging import BinaryMask
from mitovol.io import write_detections_jsonl, write_manifest, write_mask_png

out_dir = Path("demo_output")
out_dir.mkdir(exist_ok=True)

# ROI frame: 2000x2000 px at 0.25 um/px (0.25 mm^2); mask at 0.5 um/px.
roi_side, mask_side = 2000, 1000
bits = np.zeros((mask_side, mask_side), bool)
bits[:, : mask_side // 2] = True  # left half is epithelium
mask = BinaryMask(bits=bits, resolution=Resolution(0.5))

rng = np.random.default_rng(5)
dets = [
    Detection(float(x), float(y), 20.0, 20.0, float(s))
    for x, y, s in zip(rng.uniform(0, 1980, 40), rng.uniform(0, 1980, 40), rng.uniform(0.5, 1, 40))
]

kept, rejected = filter_by_mask(dets, mask, mask_scale=0.5)
print(f"{len(dets)} detections: {len(kept)} inside epithelium, {len(rejected)} filtered out")

area_mm2 = (roi_side * 0.25e-3) ** 2
roi = RoiSpec(area_mm2=area_mm2, microns_per_pixel=Resolution(0.25), n_fields=10)
report = build_report(mask, kept, dets, roi, det_threshold=0.5)
print(f"whole-ROI index: {report.mv_whole_roi:.3f} "
      f"(Vv {report.vv_mean:.1f}% +/- {report.vv_std:.1f})")

# Same inputs through the CLI.
write_manifest(out_dir / "04_roi.json", roi_side, roi_side, 0.25, [])
write_mask_png(mask, out_dir / "04_mask.png")
write_detections_jsonl(dets, out_dir / "04_dets.jsonl")
(out_dir / "04_config.json").write_text(json.dumps({
    "roi": {"area_mm2": area_mm2, "microns_per_pixel": 0.25, "n_fields": 10},
}))

cmd = [sys.executable, "-m", "mitovol.cli", "--config", str(out_dir / "04_config.json"),
       "mvindex", "--roi", str(out_dir / "04_roi.json"),
       "--seg", str(out_dir / "04_mask.png"),
       "--dets", str(out_dir / "04_dets.jsonl"),
       "--out", str(out_dir / "04_report.json")]
subprocess.run(cmd, check=True)
print("CLI report:")
print((out_dir / "04_report.json").read_text())
print("library report serializes identically:",
      report_to_json(report) == (out_dir / "04_report.json").read_text())
