"""Optical-density conversion and color deconvolution.

Bright-field stains attenuate light multiplicatively, so pixel intensities
are first mapped to optical densities OD = -log10(I / I0). Per-pixel ODs are
then unmixed against a basis of unit-norm stain vectors: the exact inverse
for a 3-stain basis, the least-squares solution for a 2-stain basis.
Negative concentrations are physically meaningless and are clamped to zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IllConditionedStainMatrixError, InvalidInputError, InvalidParameterError
from .imaging import RasterImage, Resolution, _readonly

# Condition-number ceiling beyond which unmixing is refused.
CONDITION_LIMIT = 1e8

# Saturation (in OD-equivalents) mapping concentrations onto [0, 1].
DEFAULT_SATURATION = 2.0


@dataclass(frozen=True)
class StainMatrix:
    """Rows are unit-norm stain vectors in OD-RGB space, with labels.

    Rows must already be normalized (within 1e-9); use :meth:`from_vectors`
    to normalize arbitrary OD triples on load.
    """

    vectors: np.ndarray  # (k, 3), k in {2, 3}
    names: tuple[str, ...]

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != 3 or v.shape[0] not in (2, 3):
            raise InvalidParameterError(
                f"stain matrix must be (2, 3) or (3, 3), got shape {v.shape}"
            )
        names = tuple(self.names)
        if len(names) != v.shape[0]:
            raise InvalidParameterError("one name per stain row required")
        if len(set(names)) != len(names):
            raise InvalidParameterError(f"stain names must be unique, got {names}")
        norms = np.linalg.norm(v, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise InvalidParameterError("stain rows must be unit-norm (use from_vectors)")
        if np.linalg.matrix_rank(v) < v.shape[0]:
            raise InvalidParameterError("stain rows must be linearly independent")
        object.__setattr__(self, "vectors", _readonly(v))
        object.__setattr__(self, "names", names)

    @classmethod
    def from_vectors(cls, names, od_rgb_rows) -> "StainMatrix":
        """Normalize each OD-RGB row to unit length and build the matrix."""
        v = np.asarray(od_rgb_rows, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise InvalidParameterError(f"expected rows of 3 OD components, got shape {v.shape}")
        norms = np.linalg.norm(v, axis=1)
        if np.any(norms == 0):
            raise InvalidParameterError("stain vectors must be non-zero")
        return cls(vectors=v / norms[:, None], names=tuple(names))

    @property
    def n_stains(self) -> int:
        return self.vectors.shape[0]

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown stain {name!r}; available: {self.names}") from None


# Widely published H-DAB pair; AE1/AE3 cytokeratin is DAB-visualized.
DEFAULT_HDAB = StainMatrix.from_vectors(
    names=("hematoxylin", "dab"),
    od_rgb_rows=[(0.650, 0.704, 0.286), (0.269, 0.568, 0.776)],
)


@dataclass(frozen=True)
class ODImage:
    """Per-channel optical densities; non-negative and finite."""

    data: np.ndarray  # (h, w, 3) float64
    resolution: Resolution

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3 or data.shape[2] != 3:
            raise InvalidInputError(f"OD image must be (h, w, 3), got shape {data.shape}")
        if not np.all(np.isfinite(data)) or float(data.min()) < 0.0:
            raise InvalidInputError("OD values must be finite and >= 0")
        object.__setattr__(self, "data", _readonly(data))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class ConcentrationImage:
    """One real-valued channel per stain, same grid as the source ODImage."""

    data: np.ndarray  # (h, w, k) float64
    names: tuple[str, ...]
    resolution: Resolution

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3 or data.shape[2] != len(self.names):
            raise InvalidInputError("concentration channels must match stain names")
        object.__setattr__(self, "data", _readonly(data))
        object.__setattr__(self, "names", tuple(self.names))

    def channel(self, name: str) -> np.ndarray:
        try:
            idx = self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown stain {name!r}; available: {self.names}") from None
        return self.data[:, :, idx]


def rgb_to_od(image: RasterImage, background_intensity=(255, 255, 255)) -> ODImage:
    """Convert a byte RGB image to optical densities.

    OD = -log10(max(I, 1) / I0) per channel, clamped to >= 0. The epsilon of
    one byte prevents log(0) at full absorption; intensities above I0 clamp
    to OD 0.
    """
    if image.channels != 3 or not image.is_byte:
        raise InvalidInputError("rgb_to_od expects an 8-bit RGB image")
    i0 = np.asarray(background_intensity, dtype=np.float64).reshape(3)
    if np.any(i0 < 1):
        raise InvalidParameterError(f"background intensity components must be >= 1, got {i0}")
    intensity = np.maximum(image.data.astype(np.float64), 1.0)
    od = -np.log10(intensity / i0)
    np.clip(od, 0.0, None, out=od)
    return ODImage(data=od, resolution=image.resolution)


def deconvolve(od: ODImage, m: StainMatrix) -> ConcentrationImage:
    """Unmix optical densities into per-stain concentrations.

    Solves min ||Mᵀc - od||₂ per pixel: the exact inverse for 3 stains, the
    pseudo-inverse (least squares) for 2. Negative solutions are clamped to
    zero afterwards.
    """
    v = m.vectors
    cond = float(np.linalg.cond(v))
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise IllConditionedStainMatrixError(
            f"stain matrix condition number {cond:.3g} exceeds {CONDITION_LIMIT:.0e}"
        )
    if m.n_stains == 3:
        unmix = np.linalg.inv(v.T)  # (3, 3): c = (Mᵀ)⁻¹ od
    else:
        unmix = np.linalg.pinv(v.T)  # (2, 3): least-squares solution
    flat = od.data.reshape(-1, 3)
    conc = flat @ unmix.T
    np.clip(conc, 0.0, None, out=conc)
    return ConcentrationImage(
        data=conc.reshape(od.data.shape[0], od.data.shape[1], m.n_stains),
        names=m.names,
        resolution=od.resolution,
    )


def compose(conc: ConcentrationImage, m: StainMatrix) -> ODImage:
    """Mix concentrations back into optical densities (od = Mᵀc per pixel)."""
    if conc.names != m.names:
        raise InvalidInputError(f"stain names {conc.names} do not match matrix {m.names}")
    flat = conc.data.reshape(-1, m.n_stains)
    od = flat @ m.vectors
    np.clip(od, 0.0, None, out=od)
    return ODImage(data=od.reshape(conc.data.shape[0], conc.data.shape[1], 3),
                   resolution=conc.resolution)


def extract_channel(conc: ConcentrationImage, stain_name: str,
                    saturation: float = DEFAULT_SATURATION) -> RasterImage:
    """Select one stain channel and rescale to [0, 1].

    Concentrations are divided by ``saturation`` (OD-equivalents at which the
    channel clips to 1.0) and clamped into the unit interval.
    """
    if saturation <= 0:
        raise InvalidParameterError(f"saturation must be positive, got {saturation}")
    channel = conc.channel(stain_name)
    gray = np.clip(channel / saturation, 0.0, 1.0)
    return RasterImage(data=gray, resolution=conc.resolution)
