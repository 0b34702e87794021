"""Latent-space projection: image descriptors, 2-D PCA, class separation.

The default per-image descriptor is a 16x16 area-average downsample of the
unit-normalized plane; externally computed feature vectors can be supplied
through the feature-CSV reader instead. PCA is deterministic, including a
fixed eigenvector sign convention, so projections are reproducible
byte-for-byte.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EvalError
from .imageio import ImagePlane

#: Modality class labels used in latent-space scatter data.
CLASS_LABELS = ("MR", "CT")

DESCRIPTOR_GRID = 16


class LatentError(EvalError):
    """Invalid feature matrix, projection, or scoring input."""


@dataclass(frozen=True)
class FeatureMatrix:
    """N x D feature rows with per-row modality labels."""

    rows: np.ndarray = field(repr=False)
    labels: tuple[str, ...]

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[0] < 2 or rows.shape[1] < 2:
            raise LatentError("feature matrix must be N x D with N >= 2 and D >= 2")
        if len(self.labels) != rows.shape[0]:
            raise LatentError("one label per feature row required")
        unknown = set(self.labels) - set(CLASS_LABELS)
        if unknown:
            raise LatentError(f"unknown class label(s): {sorted(unknown)}")
        object.__setattr__(self, "rows", rows)


@dataclass(frozen=True)
class Projection:
    """Fitted 2-D PCA basis: mean, two orthonormal components, eigenvalues."""

    mean: np.ndarray = field(repr=False)
    components: np.ndarray = field(repr=False)
    eigenvalues: tuple[float, float]

    def __post_init__(self):
        comps = np.asarray(self.components, dtype=np.float64)
        if comps.shape[0] != 2:
            raise LatentError("projection carries exactly two components")
        gram = comps @ comps.T
        if not np.allclose(gram, np.eye(2), atol=1e-9):
            raise LatentError("components are not orthonormal")
        if not self.eigenvalues[0] >= self.eigenvalues[1] >= 0.0:
            raise LatentError("eigenvalues must be descending and nonnegative")


@dataclass(frozen=True)
class ProjectedPoints:
    """2-D coordinates with their class labels, in input row order."""

    coords: np.ndarray = field(repr=False)
    labels: tuple[str, ...]


def extract_features(img: ImagePlane) -> np.ndarray:
    """16x16 area-average downsample of the unit-normalized plane, flattened.

    Block boundaries are floor(i*dim/16), so a 16x16 image maps to its own
    normalized pixels in row-major order.
    """
    if img.height < DESCRIPTOR_GRID or img.width < DESCRIPTOR_GRID:
        raise LatentError(
            f"image {img.width}x{img.height} below descriptor size "
            f"{DESCRIPTOR_GRID}x{DESCRIPTOR_GRID}"
        )
    unit = img.pixels / img.range_r
    g = DESCRIPTOR_GRID
    row_edges = [i * img.height // g for i in range(g + 1)]
    col_edges = [j * img.width // g for j in range(g + 1)]
    out = np.empty(g * g, dtype=np.float64)
    for i in range(g):
        for j in range(g):
            block = unit[row_edges[i] : row_edges[i + 1], col_edges[j] : col_edges[j + 1]]
            out[i * g + j] = block.mean()
    return out


def _fix_sign(vec: np.ndarray) -> np.ndarray:
    """Flip so the first non-negligible coordinate is positive."""
    tol = 1e-12 * max(1.0, float(np.max(np.abs(vec))))
    for v in vec:
        if abs(v) > tol:
            return vec if v > 0 else -vec
    return vec


def pca_fit(matrix: FeatureMatrix) -> Projection:
    """Top-2 PCA of the sample covariance (N-1 denominator).

    Deterministic by construction: eigh plus the positive-leading-coordinate
    sign convention.
    """
    rows = matrix.rows
    mean = rows.mean(axis=0)
    centered = rows - mean
    if not np.any(centered):
        raise LatentError("feature matrix has zero total variance")
    cov = centered.T @ centered / (rows.shape[0] - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:2]
    values = np.clip(eigvals[order], 0.0, None)
    comps = np.vstack([_fix_sign(eigvecs[:, i]) for i in order])
    return Projection(mean=mean, components=comps, eigenvalues=(float(values[0]), float(values[1])))


def project(proj: Projection, matrix: FeatureMatrix) -> ProjectedPoints:
    """Project rows onto the fitted basis: coords = components . (row - mean)."""
    if matrix.rows.shape[1] != proj.mean.shape[0]:
        raise LatentError(
            f"feature dimension {matrix.rows.shape[1]} does not match "
            f"projection dimension {proj.mean.shape[0]}"
        )
    coords = (matrix.rows - proj.mean) @ proj.components.T
    return ProjectedPoints(coords=coords, labels=matrix.labels)


def separation_score(coords: np.ndarray, labels: tuple[str, ...]) -> float:
    """Mean silhouette coefficient of the labeled points (Euclidean).

    Points in singleton classes score 0, as do coincident points where both
    mean distances vanish.
    """
    pts = np.asarray(coords, dtype=np.float64)
    if pts.ndim != 2:
        raise LatentError("coordinates must be an N x d array")
    n = pts.shape[0]
    if n < 3:
        raise LatentError("separation score needs at least 3 points")
    labels = tuple(labels)
    if len(labels) != n:
        raise LatentError("one label per point required")
    classes = sorted(set(labels))
    if len(classes) < 2:
        raise LatentError("both classes must be present")
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=-1))
    lab = np.asarray(labels)
    scores = np.empty(n)
    for i in range(n):
        same = lab == lab[i]
        n_same = int(same.sum())
        if n_same == 1:
            scores[i] = 0.0
            continue
        a = dist[i][same].sum() / (n_same - 1)
        b = min(dist[i][lab == other].mean() for other in classes if other != lab[i])
        denom = max(a, b)
        scores[i] = 0.0 if denom == 0.0 else (b - a) / denom
    return float(scores.mean())


# --- CSV interchange --------------------------------------------------------


def read_feature_csv(path) -> FeatureMatrix:
    """Read features with header label,f0,f1,..."""
    path = Path(path)
    if not path.exists():
        raise LatentError(f"feature file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "label" or len(header) < 3:
            raise LatentError("feature CSV needs header label,f0,f1,...")
        labels: list[str] = []
        rows: list[list[float]] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise LatentError(f"{path}:{lineno}: expected {len(header)} fields")
            labels.append(row[0])
            try:
                rows.append([float(v) for v in row[1:]])
            except ValueError as exc:
                raise LatentError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise LatentError(f"feature CSV has no rows: {path}")
    return FeatureMatrix(rows=np.array(rows), labels=tuple(labels))


def write_coords_csv(points: ProjectedPoints, path) -> None:
    """Write projected coordinates with header label,x,y at full precision."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["label", "x", "y"])
        for label, (x, y) in zip(points.labels, points.coords):
            writer.writerow([label, repr(float(x)), repr(float(y))])


def read_image_list(path) -> list[tuple[str, str]]:
    """Read a label,path CSV naming images to run the default descriptor on."""
    path = Path(path)
    if not path.exists():
        raise LatentError(f"image list not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"label", "path"} <= set(reader.fieldnames):
            raise LatentError("image list CSV needs header label,path")
        entries = [((row["label"] or "").strip(), (row["path"] or "").strip()) for row in reader]
    if not entries:
        raise LatentError(f"image list has no rows: {path}")
    return entries
