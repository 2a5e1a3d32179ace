"""mitovol: volume-corrected mitotic index on histology regions of interest.

The package covers the classical (non-neural) half of an automated M/V-Index
pipeline: IHC-based epithelium reference masks, deterministic tiled fusion of
model outputs, mask filtering of mitotic-figure detections, the index itself
with a stereological point-grid estimator, and an evaluation suite.
"""

from .errors import (
    IllConditionedStainMatrixError,
    InconsistentFieldError,
    InvalidInputError,
    InvalidParameterError,
    InvalidTransformError,
    MitovolError,
    UndefinedCorrelationError,
    UndefinedIndexError,
)
from .fusion import Detection, ProbabilityTile, box_iou, filter_by_mask, fuse_detections, stitch_probabilities
from .imaging import (
    AffineTransform,
    BinaryMask,
    RasterImage,
    Resolution,
    TileGrid,
    TileRect,
    apply_affine,
    make_tile_grid,
    resample_mask,
)
from .maskgen import (
    MaskGenParams,
    NoStainWarning,
    build_ihc_map,
    generate_reference_mask,
    refine_patch,
    select_patches,
)
from .metrics import PairedSeries, dice_f1, iou, mae, pearson_r, render_overlay
from .morphology import DiskKernel, binary_morph, gaussian_blur, otsu_threshold
from .mvindex import (
    FieldResult,
    MVReport,
    RoiSpec,
    WeibelGrid,
    build_report,
    epithelium_fraction,
    k_coefficient,
    mv_index_fields,
    mv_index_single,
    weibel_estimate,
    weibel_points,
)
from .stain import (
    DEFAULT_HDAB,
    ConcentrationImage,
    ODImage,
    StainMatrix,
    compose,
    deconvolve,
    extract_channel,
    rgb_to_od,
)

__version__ = "0.1.0"
