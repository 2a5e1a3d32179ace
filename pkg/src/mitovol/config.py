"""Pipeline configuration: strict-keyed JSON mirroring the domain types.

Unknown keys are rejected everywhere — a typo in a scientific pipeline must
fail loudly, not silently fall back to a default.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError
from .imaging import Resolution
from .maskgen import MaskGenParams
from .mvindex import RoiSpec
from .stain import StainMatrix


@dataclass(frozen=True)
class TilingSpec:
    """Tile size, overlap, and working resolution of one model stage."""

    tile_size: int
    overlap: int
    microns_per_pixel: float

    def __post_init__(self):
        if self.tile_size <= 0 or not (0 <= self.overlap < self.tile_size):
            raise ConfigError(f"invalid tiling: {self}")
        if self.microns_per_pixel <= 0:
            raise ConfigError(f"microns_per_pixel must be positive, got {self}")


# Working defaults: segmentation on 1024/128 tiles at 0.5 µm/px, detection on
# 512/64 tiles at 0.25 µm/px.
DEFAULT_SEGMENTATION = TilingSpec(tile_size=1024, overlap=128, microns_per_pixel=0.5)
DEFAULT_DETECTION = TilingSpec(tile_size=512, overlap=64, microns_per_pixel=0.25)


@dataclass(frozen=True)
class PipelineConfig:
    stains_path: str | None = None
    maskgen: MaskGenParams = MaskGenParams()
    segmentation: TilingSpec = DEFAULT_SEGMENTATION
    detection: TilingSpec = DEFAULT_DETECTION
    det_threshold: float = 0.5
    nms_iou: float = 0.5
    roi: RoiSpec = RoiSpec()
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.det_threshold <= 1.0):
            raise ConfigError(f"det_threshold must lie in [0, 1], got {self.det_threshold}")
        if not (0.0 < self.nms_iou <= 1.0):
            raise ConfigError(f"nms_iou must lie in (0, 1], got {self.nms_iou}")


def _build_dataclass(cls, doc: dict, where: str):
    allowed = {f.name for f in fields(cls)}
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    return cls(**doc)


def _roi_spec(doc: dict) -> RoiSpec:
    allowed = {"area_mm2", "microns_per_pixel", "n_fields"}
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in roi: {sorted(unknown)}")
    kwargs = dict(doc)
    if "microns_per_pixel" in kwargs:
        kwargs["microns_per_pixel"] = Resolution(float(kwargs["microns_per_pixel"]))
    return RoiSpec(**kwargs)


def config_from_dict(doc: dict) -> PipelineConfig:
    allowed = {"stains", "maskgen", "segmentation", "detection",
               "det_threshold", "nms_iou", "roi", "seed"}
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in config: {sorted(unknown)}")
    kwargs = {}
    if "stains" in doc:
        kwargs["stains_path"] = doc["stains"]
    if "maskgen" in doc:
        kwargs["maskgen"] = _build_dataclass(MaskGenParams, doc["maskgen"], "maskgen")
    if "segmentation" in doc:
        kwargs["segmentation"] = _build_dataclass(TilingSpec, doc["segmentation"], "segmentation")
    if "detection" in doc:
        kwargs["detection"] = _build_dataclass(TilingSpec, doc["detection"], "detection")
    for key in ("det_threshold", "nms_iou", "seed"):
        if key in doc:
            kwargs[key] = doc[key]
    if "roi" in doc:
        kwargs["roi"] = _roi_spec(doc["roi"])
    return PipelineConfig(**kwargs)


def load_config(path) -> PipelineConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config not found: {path}", code="config_not_found")
    try:
        doc = json.loads(path.read_text("utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    return config_from_dict(doc)


def load_stain_matrix(path) -> StainMatrix:
    """Load a stain matrix config: {"stains": [{"name", "od_rgb"}, ...]}.

    Vectors are normalized on load.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"stain config not found: {path}", code="config_not_found")
    try:
        doc = json.loads(path.read_text("utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"stain config {path} is not valid JSON: {e}") from e
    if not isinstance(doc, dict) or set(doc) != {"stains"}:
        raise ConfigError(f"stain config {path} must have exactly the key 'stains'")
    names = []
    rows = []
    for entry in doc["stains"]:
        if not isinstance(entry, dict) or set(entry) != {"name", "od_rgb"}:
            raise ConfigError("each stain needs exactly the keys 'name' and 'od_rgb'")
        names.append(str(entry["name"]))
        rows.append([float(v) for v in entry["od_rgb"]])
    return StainMatrix.from_vectors(names, rows)


def load_maskgen_params(path) -> MaskGenParams:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"params not found: {path}", code="config_not_found")
    try:
        doc = json.loads(path.read_text("utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"params {path} is not valid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise ConfigError(f"params {path} must be a JSON object")
    return _build_dataclass(MaskGenParams, doc, "maskgen params")
