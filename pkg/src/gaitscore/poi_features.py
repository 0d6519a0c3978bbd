"""Per-frame point-of-interest histograms from depth images.

Pipeline per frame: a segment-test detector finds pixels whose full 16-pixel
Bresenham ring (radius 3) is uniformly nearer or farther than the center by a
depth margin; each keypoint yields a 49-dimensional raw feature (16 ring
offset vectors in camera space plus a body-height ratio); features are
projected to 3 dimensions with a trained linear basis, quantized on a fixed
3-D grid, and accumulated into an unnormalized per-frame histogram.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateCalibration,
    DegenerateCovarianceWarning,
    EmptyInput,
    InsufficientSamples,
)
from .frames import DepthFrame, Intrinsics

logger = logging.getLogger(__name__)

RAW_FEATURE_DIM = 49
PCA_DIM = 3
MIN_PCA_SAMPLES = 50
EIGENVALUE_CUTOFF = 1e-12

# 16-pixel Bresenham circle of radius 3 as (drow, dcol), clockwise starting
# at 12 o'clock. Frozen: the raw-feature concatenation order depends on it.
RING_OFFSETS = np.array(
    [
        (-3, 0), (-3, 1), (-2, 2), (-1, 3),
        (0, 3), (1, 3), (2, 2), (3, 1),
        (3, 0), (3, -1), (2, -2), (1, -3),
        (0, -3), (-1, -3), (-2, -2), (-3, -1),
    ],
    dtype=np.int64,
)
RING_RADIUS = 3


@dataclass
class KeyPoint:
    """A detected point of interest with its ring, in pixels and camera mm."""

    row: int
    col: int
    ring_px: np.ndarray   # (16, 2) absolute (row, col)
    p3d: np.ndarray       # (3,) mm
    ring_3d: np.ndarray   # (16, 3) mm


def detect_keypoints(frame: DepthFrame, intrinsics: Intrinsics,
                     threshold_mm: float = 30.0) -> list:
    """Run the full-ring segment test on one depth frame.

    A pixel qualifies iff all 16 ring depths exceed its own depth by more than
    ``threshold_mm``, or all 16 fall below it by more than ``threshold_mm``.
    Pixels are discarded when they or any ring pixel are background, or when
    the ring would leave the frame. Output is ordered row-major.
    """
    if threshold_mm <= 0:
        raise ValueError(f"threshold_mm must be positive, got {threshold_mm}")
    d = frame.depth.astype(np.float64)
    h, w = d.shape
    fg = d > 0

    ok = fg.copy()
    ok[:RING_RADIUS, :] = False
    ok[-RING_RADIUS:, :] = False
    ok[:, :RING_RADIUS] = False
    ok[:, -RING_RADIUS:] = False

    padded = np.pad(d, RING_RADIUS)
    brighter = np.ones_like(fg)
    darker = np.ones_like(fg)
    hi = d + threshold_mm
    lo = d - threshold_mm
    for dr, dc in RING_OFFSETS:
        ring = padded[RING_RADIUS + dr: RING_RADIUS + dr + h,
                      RING_RADIUS + dc: RING_RADIUS + dc + w]
        ok &= ring > 0
        brighter &= ring > hi
        darker &= ring < lo
    mask = ok & (brighter | darker)

    positions = np.argwhere(mask)  # row-major order
    if positions.size == 0:
        return []

    rows = positions[:, 0]
    cols = positions[:, 1]
    ring_rows = rows[:, None] + RING_OFFSETS[:, 0][None, :]
    ring_cols = cols[:, None] + RING_OFFSETS[:, 1][None, :]
    p3d = _back_project(rows, cols, d[rows, cols], intrinsics)
    ring_3d = _back_project(ring_rows, ring_cols, d[ring_rows, ring_cols], intrinsics)

    out = []
    for i in range(rows.shape[0]):
        out.append(KeyPoint(
            row=int(rows[i]), col=int(cols[i]),
            ring_px=np.stack([ring_rows[i], ring_cols[i]], axis=1),
            p3d=p3d[i], ring_3d=ring_3d[i],
        ))
    return out


def _back_project(rows, cols, z, intr: Intrinsics) -> np.ndarray:
    """Pinhole back-projection of pixel (row, col, depth mm) to (X, Y, Z) mm."""
    x = (cols - intr.cx) * z / intr.fx
    y = (rows - intr.cy) * z / intr.fy
    return np.stack([x, y, z], axis=-1)


def raw_feature(kp: KeyPoint, head_px, ground_row: float) -> np.ndarray:
    """49-vector: 16 ring offset vectors (mm) plus the height ratio.

    The height ratio is (ground_row - kp.row) / (ground_row - head_row) in
    image rows, clamped to [0, 1]: 1 at the head, 0 at the ground.
    """
    head_row = float(np.asarray(head_px).reshape(-1)[0])
    if ground_row == head_row:
        raise DegenerateCalibration("ground row equals head row")
    diff = kp.ring_3d - kp.p3d
    ratio = (ground_row - kp.row) / (ground_row - head_row)
    ratio = min(max(ratio, 0.0), 1.0)
    out = np.empty(RAW_FEATURE_DIM)
    out[:48] = diff.ravel()
    out[48] = ratio
    return out


def frame_raw_features(keypoints: list, head_px, ground_row: float) -> np.ndarray:
    """Stack raw features for one frame's keypoints; (n, 49), possibly empty."""
    if not keypoints:
        return np.empty((0, RAW_FEATURE_DIM))
    return np.stack([raw_feature(kp, head_px, ground_row) for kp in keypoints])


# --- dimensionality reduction -------------------------------------------------

@dataclass
class PcaModel:
    """Top-3 principal directions of the raw-feature cloud."""

    mean: np.ndarray         # (49,)
    basis: np.ndarray        # (3, 49), rows orthonormal
    eigenvalues: np.ndarray  # (3,), descending

    def validate(self) -> None:
        gram = self.basis @ self.basis.T
        if np.max(np.abs(gram - np.eye(self.basis.shape[0]))) > 1e-9:
            raise ValueError("basis rows not orthonormal")
        if np.any(np.diff(self.eigenvalues) > 0):
            raise ValueError("eigenvalues not sorted descending")


def fit_pca(samples: np.ndarray) -> PcaModel:
    """Fit the 3-D projection basis from pooled raw features.

    Covariance uses divisor n-1. Basis rows are sign-normalized so each row's
    largest-magnitude entry is non-negative. When fewer than 3 directions
    carry variance above 1e-12, the missing rows are padded with standard
    basis vectors orthogonal to the found ones and a warning is issued.

    Raises:
        InsufficientSamples: fewer than 50 samples.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"samples must be 2-D, got shape {x.shape}")
    n, dim = x.shape
    if n < MIN_PCA_SAMPLES:
        raise InsufficientSamples(f"PCA needs >= {MIN_PCA_SAMPLES} samples, got {n}")

    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (n - 1)
    evals, evecs = np.linalg.eigh(cov)  # ascending
    order = np.argsort(evals)[::-1][:PCA_DIM]
    top_vals = evals[order]
    basis = evecs[:, order].T.copy()

    n_valid = int(np.count_nonzero(top_vals > EIGENVALUE_CUTOFF))
    if n_valid < PCA_DIM:
        warnings.warn(
            f"covariance has only {n_valid} informative directions; "
            f"padding {PCA_DIM - n_valid} with standard basis vectors",
            DegenerateCovarianceWarning,
        )
        basis = _pad_basis(basis[:n_valid], dim)

    for i in range(PCA_DIM):
        j = int(np.argmax(np.abs(basis[i])))
        if basis[i, j] < 0:
            basis[i] = -basis[i]

    return PcaModel(mean=mean, basis=basis, eigenvalues=top_vals)


def _pad_basis(found: np.ndarray, dim: int) -> np.ndarray:
    rows = [r for r in found]
    for k in range(dim):
        if len(rows) == PCA_DIM:
            break
        cand = np.zeros(dim)
        cand[k] = 1.0
        for r in rows:
            cand = cand - (cand @ r) * r
        norm = np.linalg.norm(cand)
        if norm > 0.5:
            rows.append(cand / norm)
    return np.stack(rows)


def project(pca: PcaModel, f: np.ndarray) -> np.ndarray:
    """Project one raw feature (or a stack of them) onto the basis."""
    f = np.asarray(f, dtype=np.float64)
    return (f - pca.mean) @ pca.basis.T


# --- spatial quantization -------------------------------------------------------

@dataclass
class QuantBounds:
    """Per-dimension quantization range fit on training projections.

    ``eps`` is per-dimension, 1e-6 * max(1, range): it keeps the scaled
    coordinate strictly below q so indices stay inside [0, q^3 - 1].
    """

    min: np.ndarray  # (3,)
    max: np.ndarray  # (3,)
    q: int
    eps: np.ndarray  # (3,)

    def validate(self) -> None:
        if self.q < 2:
            raise ValueError(f"q must be >= 2, got {self.q}")
        if np.any(self.max < self.min):
            raise ValueError("max < min in quantization bounds")
        if np.any(self.eps <= 0):
            raise ValueError("eps must be positive")

    @property
    def n_bins(self) -> int:
        return self.q ** PCA_DIM


def fit_bounds(projected: np.ndarray, q: int = 5) -> QuantBounds:
    """Per-dimension min/max over training projections.

    Raises:
        EmptyInput: no projections given.
    """
    v = np.asarray(projected, dtype=np.float64).reshape(-1, PCA_DIM)
    if v.shape[0] == 0:
        raise EmptyInput("no projected vectors to fit bounds on")
    mins = v.min(axis=0)
    maxs = v.max(axis=0)
    eps = 1e-6 * np.maximum(1.0, maxs - mins)
    b = QuantBounds(min=mins, max=maxs, q=int(q), eps=eps)
    b.validate()
    return b


def quantize_index(v: np.ndarray, bounds: QuantBounds) -> int:
    """Flat bin index of one 3-vector; out-of-range input is clamped first."""
    idx, _ = quantize_many(np.asarray(v, dtype=np.float64).reshape(1, PCA_DIM), bounds)
    return int(idx[0])


def quantize_many(vs: np.ndarray, bounds: QuantBounds):
    """Vectorized quantization.

    Returns:
        (indices, n_clamped): flat bin indices in [0, q^3 - 1] and how many
        vectors needed clamping into the training bounds.
    """
    v = np.asarray(vs, dtype=np.float64).reshape(-1, PCA_DIM)
    clipped = np.clip(v, bounds.min, bounds.max)
    n_clamped = int(np.count_nonzero(np.any(clipped != v, axis=1)))
    span = bounds.max - bounds.min + bounds.eps
    cells = np.floor(bounds.q * (clipped - bounds.min) / span).astype(np.int64)
    q = bounds.q
    indices = cells[:, 0] + q * cells[:, 1] + q * q * cells[:, 2]
    return indices, n_clamped


@dataclass
class PoIHistogram:
    """Unnormalized q^3-bin count histogram of one frame's keypoints."""

    bins: np.ndarray  # (q^3,) non-negative ints
    n_points: int
    n_clamped: int = 0

    def validate(self) -> None:
        if int(self.bins.sum()) != self.n_points:
            raise ValueError("histogram mass does not equal keypoint count")
        if np.any(self.bins < 0):
            raise ValueError("negative histogram bin")


def build_histogram(projections: np.ndarray, bounds: QuantBounds) -> PoIHistogram:
    """Count quantized projections into a fresh histogram.

    Zero keypoints yield an all-zero histogram, which is a valid result.
    """
    v = np.asarray(projections, dtype=np.float64).reshape(-1, PCA_DIM)
    if v.shape[0] == 0:
        return PoIHistogram(bins=np.zeros(bounds.n_bins, dtype=np.int64),
                            n_points=0, n_clamped=0)
    indices, n_clamped = quantize_many(v, bounds)
    bins = np.bincount(indices, minlength=bounds.n_bins).astype(np.int64)
    return PoIHistogram(bins=bins, n_points=int(v.shape[0]), n_clamped=n_clamped)
