"""Image and manifest loading.

Every metric downstream operates on an :class:`ImagePlane`: a single-channel
float64 raster in native 0..255 units together with its dynamic range R.
RGB inputs are collapsed to luma on load; nothing is ever rescaled.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ImageError, ManifestError

#: Translation directions recognized in manifests.
DIRECTIONS = ("MR2CT", "CT2MR")

#: The six donor-model categories recognized in manifests (the weighting
#: table in :mod:`mrcteval.losses` is keyed by these names).
CATEGORIES = (
    "Artistic Style Transfer",
    "Animal Images",
    "Natural Landscape Images",
    "Photography",
    "Satellite and Map Images",
    "Urban Scenes",
)

# ITU-R BT.601 luma weights.
_LUMA_R, _LUMA_G, _LUMA_B = 0.299, 0.587, 0.114


@dataclass(frozen=True)
class ImagePlane:
    """Single-channel 2-D raster with an explicit dynamic range.

    Attributes
    ----------
    width, height : int
        Pixel dimensions, both positive.
    pixels : np.ndarray
        float64 array of shape (height, width), values in [0, range_r].
    range_r : float
        Maximum fluctuation R of the source data type (255 for 8-bit).
    """

    width: int
    height: int
    pixels: np.ndarray = field(repr=False)
    range_r: float = 255.0

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ImageError("image dimensions must be positive")
        if self.range_r <= 0:
            raise ImageError("range_r must be positive")
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.shape != (self.height, self.width):
            raise ImageError(
                f"pixel buffer shape {px.shape} does not match "
                f"{self.height}x{self.width}"
            )
        if px.size and (px.min() < 0.0 or px.max() > self.range_r):
            raise ImageError("pixel values outside [0, range_r]")
        object.__setattr__(self, "pixels", px)

    @classmethod
    def from_array(cls, arr, range_r: float = 255.0) -> "ImagePlane":
        """Wrap a 2-D array-like as an ImagePlane."""
        px = np.asarray(arr, dtype=np.float64)
        if px.ndim != 2:
            raise ImageError("expected a 2-D array")
        h, w = px.shape
        return cls(width=w, height=h, pixels=px, range_r=range_r)

    def same_shape(self, other: "ImagePlane") -> bool:
        return self.width == other.width and self.height == other.height


@dataclass(frozen=True)
class PairRecord:
    """One (generated, reference) image pair from an evaluation manifest."""

    model_id: str
    category: str
    direction: str
    generated_path: str
    reference_path: str
    subject_id: str = ""

    def __post_init__(self):
        if not self.model_id:
            raise ManifestError("model_id must be non-empty")
        if self.direction not in DIRECTIONS:
            raise ManifestError(
                f"unknown direction {self.direction!r} "
                f"(expected one of {', '.join(DIRECTIONS)})"
            )
        if self.category and self.category not in CATEGORIES:
            raise ManifestError(f"unknown category {self.category!r}")


@dataclass(frozen=True)
class EvalManifest:
    """Ordered catalog of pairs driving a batch evaluation."""

    records: tuple[PairRecord, ...]

    def __post_init__(self):
        seen = set()
        for r in self.records:
            key = (r.model_id, r.direction, r.generated_path)
            if key in seen:
                raise ManifestError(f"duplicate pair {key}")
            seen.add(key)

    def __len__(self) -> int:
        return len(self.records)


def to_luma(r: float, g: float, b: float) -> float:
    """Collapse an RGB triple in [0, 255] to BT.601 luma."""
    return _LUMA_R * r + _LUMA_G * g + _LUMA_B * b


def load_image(path) -> ImagePlane:
    """Load an 8-bit grayscale or RGB PNG as an ImagePlane with R = 255.

    RGB inputs are converted to luma first. Any other mode or bit depth is
    rejected rather than rescaled, so range_r semantics stay unambiguous.
    """
    path = Path(path)
    if not path.exists():
        raise ImageError(f"image file not found: {path}")
    try:
        with Image.open(path) as img:
            if img.format != "PNG":
                raise ImageError(f"not a PNG file: {path}")
            if img.mode == "L":
                px = np.asarray(img, dtype=np.float64)
            elif img.mode == "RGB":
                rgb = np.asarray(img, dtype=np.float64)
                px = _LUMA_R * rgb[:, :, 0] + _LUMA_G * rgb[:, :, 1] + _LUMA_B * rgb[:, :, 2]
            elif img.mode in ("I", "I;16", "I;16B", "I;16L"):
                raise ImageError(f"unsupported bit depth (not 8-bit): {path}")
            else:
                raise ImageError(f"unsupported PNG mode {img.mode!r}: {path}")
    except UnidentifiedImageError as exc:
        raise ImageError(f"unreadable or corrupt PNG: {path}") from exc
    except (OSError, SyntaxError) as exc:
        # PIL decodes lazily; truncated frames surface here
        raise ImageError(f"unreadable or corrupt PNG: {path}: {exc}") from exc
    if px.size == 0:
        raise ImageError(f"zero-area image: {path}")
    h, w = px.shape
    return ImagePlane(width=w, height=h, pixels=px, range_r=255.0)


_REQUIRED_COLUMNS = ("model_id", "category", "direction", "generated_path", "reference_path")


def load_manifest(path) -> EvalManifest:
    """Parse an evaluation manifest CSV, preserving record order.

    Expected header: model_id,category,direction,generated_path,
    reference_path[,subject_id]. LF or CRLF endings both accepted.
    """
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"manifest not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ManifestError(f"empty manifest: {path}")
        missing = [c for c in _REQUIRED_COLUMNS if c not in reader.fieldnames]
        if missing:
            raise ManifestError(f"missing required column(s): {', '.join(missing)}")
        records = []
        for lineno, row in enumerate(reader, start=2):
            try:
                records.append(
                    PairRecord(
                        model_id=(row["model_id"] or "").strip(),
                        category=(row["category"] or "").strip(),
                        direction=(row["direction"] or "").strip(),
                        generated_path=(row["generated_path"] or "").strip(),
                        reference_path=(row["reference_path"] or "").strip(),
                        subject_id=(row.get("subject_id") or "").strip(),
                    )
                )
            except ManifestError as exc:
                raise ManifestError(f"{path}:{lineno}: {exc}") from exc
    if not records:
        raise ManifestError(f"manifest has no records: {path}")
    return EvalManifest(records=tuple(records))
