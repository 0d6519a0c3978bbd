"""Per-frame posture-symmetry descriptors.

The silhouette is split into left and right half-bodies by the line from the
head pixel to its vertical projection on the ground row. Each frame yields the
pair of half-body pixel ratios and, per half, a horizontal-projection
histogram (foreground count per image row over the whole body's row extent)
pooled into k bands and L2-normalized.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import EmptySilhouette, HeadBelowGround
from .frames import DepthFrame

DEFAULT_PROJ_BINS = 10


@dataclass(frozen=True)
class SeparationLine:
    """Line splitting the body, from the head pixel down to the ground row."""

    top: Tuple[float, float]     # (row, col) head pixel
    bottom: Tuple[float, float]  # (row, col) projection on the ground

    def __post_init__(self):
        if not self.top[0] < self.bottom[0]:
            raise HeadBelowGround(
                f"line top row {self.top[0]} not above bottom row {self.bottom[0]}"
            )

    def col_at(self, row):
        """Column of the line at the given row(s), by linear interpolation."""
        r0, c0 = self.top
        r1, c1 = self.bottom
        return c0 + (np.asarray(row, dtype=np.float64) - r0) * (c1 - c0) / (r1 - r0)


def separation_line(head_px, ground_row: float) -> SeparationLine:
    """Head pixel projected vertically onto the (horizontal) ground row."""
    head = np.asarray(head_px, dtype=np.float64).reshape(-1)
    if head[0] >= ground_row:
        raise HeadBelowGround(f"head row {head[0]} not above ground row {ground_row}")
    return SeparationLine(top=(float(head[0]), float(head[1])),
                          bottom=(float(ground_row), float(head[1])))


def split_silhouette(frame, line: SeparationLine, on_line_left: bool = True):
    """Partition the foreground into (left, right) boolean masks.

    Pixels exactly on the line go left by default; the flag exists so a
    horizontally flipped frame can flip the tiebreak with it, making the
    mirror swap exact.
    """
    fg = frame.foreground() if isinstance(frame, DepthFrame) else np.asarray(frame) > 0
    h, w = fg.shape
    line_cols = line.col_at(np.arange(h))[:, None]
    cols = np.arange(w, dtype=np.float64)[None, :]
    side = cols <= line_cols if on_line_left else cols < line_cols
    left = fg & side
    right = fg & ~side
    return left, right


def half_body_ratio(left_mask: np.ndarray, whole_mask: np.ndarray):
    """(ratio_left, ratio_right); the right ratio is the exact complement.

    Raises:
        EmptySilhouette: the whole-body mask has no pixels.
    """
    n_whole = int(np.count_nonzero(whole_mask))
    if n_whole == 0:
        raise EmptySilhouette("whole-body mask is empty")
    ratio_left = int(np.count_nonzero(left_mask)) / n_whole
    return ratio_left, 1.0 - ratio_left


def row_extent(mask: np.ndarray) -> Optional[Tuple[int, int]]:
    """Inclusive (first, last) occupied row of a mask, or None if empty."""
    rows = np.flatnonzero(mask.any(axis=1))
    if rows.size == 0:
        return None
    return int(rows[0]), int(rows[-1])


def projection_histogram(mask: np.ndarray,
                         row_range: Optional[Tuple[int, int]] = None) -> np.ndarray:
    """Foreground count per row over ``row_range`` (inclusive).

    The range should be the whole-body extent so the two halves' histograms
    refer to the same body heights; it defaults to the mask's own extent.
    An empty half yields a zero vector over the given range.
    """
    if row_range is None:
        row_range = row_extent(mask)
        if row_range is None:
            return np.zeros(0, dtype=np.int64)
    r0, r1 = row_range
    return np.count_nonzero(mask[r0:r1 + 1], axis=1).astype(np.int64)


def quantize_projection(rows: np.ndarray, k: int = DEFAULT_PROJ_BINS) -> np.ndarray:
    """Pool per-row counts into k contiguous bands and L2-normalize.

    Band lengths are as equal as possible: the first (len mod k) bands are one
    row longer. An all-zero input returns the zero vector, never NaN.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    counts = np.asarray(rows, dtype=np.float64).reshape(-1)
    n = counts.size
    base, rem = divmod(n, k)
    bins = np.zeros(k)
    start = 0
    for i in range(k):
        length = base + 1 if i < rem else base
        bins[i] = counts[start:start + length].sum()
        start += length
    norm = np.linalg.norm(bins)
    if norm == 0.0:
        return bins
    return bins / norm


@dataclass
class LoPSFrameFeature:
    """One frame's symmetry descriptors: ratios plus two k-bin unit vectors."""

    ratio_left: float
    ratio_right: float
    left_hist: np.ndarray
    right_hist: np.ndarray
    k: int


def compute_lops_feature(frame, head_px, ground_row: float,
                         k: int = DEFAULT_PROJ_BINS,
                         on_line_left: bool = True) -> LoPSFrameFeature:
    """Full per-frame LoPS extraction: split, ratios, banded projections."""
    line = separation_line(head_px, ground_row)
    left, right = split_silhouette(frame, line, on_line_left=on_line_left)
    whole = left | right
    ratio_left, ratio_right = half_body_ratio(left, whole)
    extent = row_extent(whole)
    left_hist = quantize_projection(projection_histogram(left, extent), k)
    right_hist = quantize_projection(projection_histogram(right, extent), k)
    return LoPSFrameFeature(ratio_left=ratio_left, ratio_right=ratio_right,
                            left_hist=left_hist, right_hist=right_hist, k=k)
