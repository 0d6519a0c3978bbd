"""Depth-frame sequences: in-memory model, 16-bit PGM storage, validation.

A sequence on disk is a directory of ``frame_000000.pgm`` .. ``frame_NNNNNN.pgm``
(binary P5, maxval 65535, big-endian samples, value = depth in millimeters,
0 = background) plus one ``meta.json`` sidecar carrying per-frame head pixels,
ground rows, camera intrinsics, frame rate, and an optional label.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import (
    CorruptPgm,
    EmptySilhouette,
    FrameSizeMismatch,
    HeadBelowGround,
    InvalidFrame,
    InvalidMeta,
    MetaArityMismatch,
    MissingMeta,
)

logger = logging.getLogger(__name__)

DEPTH_MIN_MM = 200
DEPTH_MAX_MM = 10000
MIN_FRAME_SIDE = 32
PGM_MAXVAL = 65535
META_FILENAME = "meta.json"
META_VERSION = 1
LABELS = ("normal", "abnormal")

_FRAME_RE = re.compile(r"^frame_(\d{6})\.pgm$")


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole camera parameters, in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise InvalidMeta(f"fx and fy must be positive, got ({self.fx}, {self.fy})")


@dataclass
class DepthFrame:
    """One depth image: uint16 millimeters, 0 = background.

    ``n_clamped`` counts foreground pixels that were zeroed during validation
    because they fell outside the plausible [200, 10000] mm window.
    """

    depth: np.ndarray
    index: int = 0
    n_clamped: int = 0

    def __post_init__(self):
        d = np.asarray(self.depth)
        if d.ndim != 2:
            raise InvalidFrame(f"depth grid must be 2-D, got shape {d.shape}")
        if d.shape[0] < MIN_FRAME_SIDE or d.shape[1] < MIN_FRAME_SIDE:
            raise InvalidFrame(
                f"frame {d.shape[1]}x{d.shape[0]} smaller than "
                f"{MIN_FRAME_SIDE}x{MIN_FRAME_SIDE}"
            )
        self.depth = d

    @property
    def height(self) -> int:
        return self.depth.shape[0]

    @property
    def width(self) -> int:
        return self.depth.shape[1]

    def foreground(self) -> np.ndarray:
        return self.depth > 0


@dataclass
class SequenceMeta:
    """Per-sequence calibration and per-frame head/ground annotations."""

    head_px: np.ndarray     # (n, 2) float, (row, col) per frame
    ground_row: np.ndarray  # (n,) int, per frame
    intrinsics: Intrinsics
    fps: float

    def __post_init__(self):
        self.head_px = np.asarray(self.head_px, dtype=np.float64).reshape(-1, 2)
        self.ground_row = np.asarray(self.ground_row, dtype=np.int64).reshape(-1)
        if self.head_px.shape[0] != self.ground_row.shape[0]:
            raise MetaArityMismatch(
                f"head_px has {self.head_px.shape[0]} entries, "
                f"ground_row has {self.ground_row.shape[0]}"
            )
        if self.fps <= 0:
            raise InvalidMeta(f"fps must be positive, got {self.fps}")

    def __len__(self) -> int:
        return self.head_px.shape[0]

    def head(self, t: int) -> np.ndarray:
        return self.head_px[t]

    def ground(self, t: int) -> int:
        return int(self.ground_row[t])


@dataclass
class DepthSequence:
    """Ordered depth frames plus their metadata and an optional label."""

    frames: list
    meta: SequenceMeta
    label: Optional[str] = None

    def __post_init__(self):
        if self.label is not None and self.label not in LABELS:
            raise InvalidMeta(f"label must be one of {LABELS} or None, got {self.label!r}")
        if len(self.meta) != len(self.frames):
            raise MetaArityMismatch(
                f"{len(self.frames)} frames but meta arrays of length {len(self.meta)}"
            )
        sizes = {(f.height, f.width) for f in self.frames}
        if len(sizes) > 1:
            raise FrameSizeMismatch(f"mixed frame sizes in sequence: {sorted(sizes)}")

    def __len__(self) -> int:
        return len(self.frames)


def validate_frame(depth: np.ndarray, head_px, ground_row: int) -> int:
    """Validate one depth grid in place against its metadata entry.

    Foreground values outside [200, 10000] mm are zeroed (treated as
    background). Operates on the mutable grid before it is frozen into a
    DepthFrame.

    Returns:
        Number of pixels zeroed by the range clamp.

    Raises:
        HeadBelowGround: head row at or below the ground row.
        EmptySilhouette: the frame has no foreground pixels at all.
    """
    head_row = float(np.asarray(head_px).reshape(-1)[0])
    if head_row >= ground_row:
        raise HeadBelowGround(f"head row {head_row} not above ground row {ground_row}")
    fg = depth > 0
    if not fg.any():
        raise EmptySilhouette("frame has no foreground pixels")
    bad = fg & ((depth < DEPTH_MIN_MM) | (depth > DEPTH_MAX_MM))
    n_bad = int(np.count_nonzero(bad))
    if n_bad:
        depth[bad] = 0
    return n_bad


# --- 16-bit PGM -------------------------------------------------------------

def read_pgm16(path) -> np.ndarray:
    """Read a binary P5 PGM with maxval 65535 into a uint16 grid."""
    buf = Path(path).read_bytes()
    tokens, pos = _pgm_header_tokens(buf)
    if len(tokens) < 4 or tokens[0] != b"P5":
        raise CorruptPgm(f"{path}: not a binary P5 PGM")
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
    except ValueError:
        raise CorruptPgm(f"{path}: malformed header") from None
    if maxval != PGM_MAXVAL:
        raise CorruptPgm(f"{path}: maxval {maxval}, expected {PGM_MAXVAL}")
    if width < 1 or height < 1:
        raise CorruptPgm(f"{path}: bad dimensions {width}x{height}")
    n = width * height
    payload = buf[pos:]
    if len(payload) < 2 * n:
        raise CorruptPgm(f"{path}: payload truncated ({len(payload)} of {2 * n} bytes)")
    grid = np.frombuffer(payload, dtype=">u2", count=n).reshape(height, width)
    return grid.astype(np.uint16)


def write_pgm16(path, depth: np.ndarray) -> None:
    """Write a uint16 grid as binary P5 PGM, big-endian, maxval 65535."""
    d = np.asarray(depth)
    header = f"P5\n{d.shape[1]} {d.shape[0]}\n{PGM_MAXVAL}\n".encode("ascii")
    payload = np.ascontiguousarray(d, dtype=np.uint16).astype(">u2").tobytes()
    Path(path).write_bytes(header + payload)


def _pgm_header_tokens(buf: bytes):
    """First four whitespace/comment-delimited header tokens and the payload offset."""
    tokens, i, n = [], 0, len(buf)
    while len(tokens) < 4 and i < n:
        c = buf[i : i + 1]
        if c in (b" ", b"\t", b"\r", b"\n"):
            i += 1
        elif c == b"#":
            j = buf.find(b"\n", i)
            i = n if j < 0 else j + 1
        else:
            j = i
            while j < n and buf[j : j + 1] not in (b" ", b"\t", b"\r", b"\n", b"#"):
                j += 1
            tokens.append(buf[i:j])
            i = j
    # exactly one whitespace byte separates the header from the payload
    return tokens, min(i + 1, n)


# --- sequence directories ----------------------------------------------------

def frame_filename(ordinal: int) -> str:
    return f"frame_{ordinal:06d}.pgm"


def load_sequence(dir_path) -> DepthSequence:
    """Load and validate a sequence directory.

    Frames are sorted by ordinal and must be contiguous from zero; every frame
    is range-validated against its meta entry.
    """
    root = Path(dir_path)
    meta_path = root / META_FILENAME
    if not meta_path.is_file():
        raise MissingMeta(f"{meta_path} not found")
    meta_doc = _parse_meta(meta_path)

    entries = []
    for p in root.iterdir():
        m = _FRAME_RE.match(p.name)
        if m:
            entries.append((int(m.group(1)), p))
    entries.sort()
    if not entries:
        raise InvalidFrame(f"{root}: no frame_NNNNNN.pgm files")
    ordinals = [e[0] for e in entries]
    if ordinals != list(range(len(entries))):
        raise InvalidFrame(f"{root}: frame ordinals not contiguous from 0: {ordinals[:8]}...")

    n = len(entries)
    head_px = meta_doc["head_px"]
    ground_row = meta_doc["ground_row"]
    if len(head_px) != n or len(ground_row) != n:
        raise MetaArityMismatch(
            f"{n} frames but head_px/ground_row of lengths "
            f"{len(head_px)}/{len(ground_row)}"
        )

    meta = SequenceMeta(
        head_px=np.asarray(head_px, dtype=np.float64),
        ground_row=np.asarray(ground_row, dtype=np.int64),
        intrinsics=meta_doc["intrinsics"],
        fps=meta_doc["fps"],
    )

    frames = []
    size = None
    for ordinal, path in entries:
        grid = read_pgm16(path)
        if size is None:
            size = grid.shape
        elif grid.shape != size:
            raise FrameSizeMismatch(
                f"{path}: {grid.shape[1]}x{grid.shape[0]} differs from "
                f"{size[1]}x{size[0]}"
            )
        n_clamped = validate_frame(grid, meta.head(ordinal), meta.ground(ordinal))
        if n_clamped:
            logger.debug("%s: zeroed %d out-of-range pixels", path, n_clamped)
        grid.flags.writeable = False
        frames.append(DepthFrame(depth=grid, index=ordinal, n_clamped=n_clamped))

    return DepthSequence(frames=frames, meta=meta, label=meta_doc["label"])


def save_sequence(seq: DepthSequence, dir_path) -> None:
    """Write a sequence directory in the on-disk format read by load_sequence."""
    root = Path(dir_path)
    root.mkdir(parents=True, exist_ok=True)
    for frame in seq.frames:
        write_pgm16(root / frame_filename(frame.index), frame.depth)
    intr = seq.meta.intrinsics
    doc = {
        "version": META_VERSION,
        "fps": float(seq.meta.fps),
        "intrinsics": {"fx": float(intr.fx), "fy": float(intr.fy),
                       "cx": float(intr.cx), "cy": float(intr.cy)},
        "head_px": [[float(r), float(c)] for r, c in seq.meta.head_px],
        "ground_row": [int(g) for g in seq.meta.ground_row],
        "label": seq.label,
    }
    text = json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"
    (root / META_FILENAME).write_text(text, encoding="utf-8")


def _parse_meta(meta_path: Path) -> dict:
    try:
        doc = json.loads(meta_path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise InvalidMeta(f"{meta_path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise InvalidMeta(f"{meta_path}: top-level value must be an object")
    version = doc.get("version")
    if version != META_VERSION:
        raise InvalidMeta(f"{meta_path}: unsupported meta version {version!r}")
    for key in ("fps", "intrinsics", "head_px", "ground_row"):
        if key not in doc:
            raise InvalidMeta(f"{meta_path}: missing key {key!r}")
    intr_doc = doc["intrinsics"]
    try:
        intrinsics = Intrinsics(
            fx=float(intr_doc["fx"]), fy=float(intr_doc["fy"]),
            cx=float(intr_doc["cx"]), cy=float(intr_doc["cy"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidMeta(f"{meta_path}: bad intrinsics: {exc}") from exc
    fps = doc["fps"]
    if not isinstance(fps, (int, float)) or fps <= 0:
        raise InvalidMeta(f"{meta_path}: fps must be a positive number")
    label = doc.get("label")
    if label is not None and label not in LABELS:
        raise InvalidMeta(f"{meta_path}: label must be one of {LABELS} or null")
    return {
        "fps": float(fps),
        "intrinsics": intrinsics,
        "head_px": doc["head_px"],
        "ground_row": doc["ground_row"],
        "label": label,
    }
