"""Deterministic parametric generator of walking depth silhouettes.

Renders a head disc, torso trapezoid, and two sinusoidally swinging leg
capsules as a depth image (nearer limbs = smaller depth), with small raised
"bumps" (knee caps, shoulders, chest markers) that give the depth image the
local contrast the keypoint detector needs. The asymmetry knobs model a limp:
one leg's swing is scaled by (1 - limp_asym), the torso leans with the stride,
and an optional sole pad thickens one foot.

The generator is a pure function of its parameters: same params + seed produce
bit-identical sequences. With ``limp_asym = 0`` and ``sole_pad_px = 0`` the
silhouette is exactly mirror-symmetric about the head-ground column in every
frame. All column geometry is therefore computed as offsets from the center
axis, so the two sides are exact float negations of each other; depth noise
perturbs values, never the silhouette mask.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParams
from .frames import DepthFrame, DepthSequence, Intrinsics, SequenceMeta

BUMP_RAISE_MM = 45.0     # bump height above its surface; FAST default threshold is 30
DEPTH_SWING_MM = 120.0   # forward/backward leg depth modulation at full swing
FOCAL_PX = 366.0


@dataclass(frozen=True)
class SynthParams:
    """Knobs of the synthetic walker.

    ``stride_hz`` is a target: the generator snaps it to the nearest
    frame-integral period (``fps / round(fps / stride_hz)``) so that the gait
    is exactly periodic in frames. ``width`` must be even so that the mirror
    axis falls between two pixel columns and symmetry is exact.
    """

    frames: int
    fps: float = 13.0
    width: int = 212
    height: int = 256
    stride_hz: float = 0.9
    swing_amp: float = 8.0
    limp_asym: float = 0.0
    sole_pad_px: int = 0
    depth_base: float = 2600.0
    noise_mm: float = 0.0
    seed: int = 0


def stride_period_frames(params: SynthParams) -> int:
    """Snapped gait period in frames (at least 2)."""
    return max(2, int(round(params.fps / params.stride_hz)))


def generate_walk(params: SynthParams) -> DepthSequence:
    """Render a depth sequence of one walker.

    Returns:
        DepthSequence with per-frame head pixel at the head disc center and
        ground_row at the foot baseline. ``label`` is left None; callers
        attach labels.

    Raises:
        InvalidParams: any parameter outside its documented range.
    """
    _validate(params)
    rng = np.random.default_rng(params.seed)
    geo = _Layout(params.width, params.height)
    period = stride_period_frames(params)

    frames = []
    heads = []
    for t in range(params.frames):
        phase = 2.0 * np.pi * ((t % period) / period)
        depth, head_off = _render_frame(params, geo, phase, rng)
        depth.flags.writeable = False
        frames.append(DepthFrame(depth=depth, index=t))
        heads.append((geo.head_row, geo.center + head_off))

    meta = SequenceMeta(
        head_px=np.asarray(heads, dtype=np.float64),
        ground_row=np.full(params.frames, geo.ground_row, dtype=np.int64),
        intrinsics=Intrinsics(
            fx=FOCAL_PX, fy=FOCAL_PX,
            cx=(params.width - 1) / 2.0, cy=(params.height - 1) / 2.0,
        ),
        fps=params.fps,
    )
    return DepthSequence(frames=frames, meta=meta, label=None)


def _validate(params: SynthParams) -> None:
    p = params
    if p.frames < 1:
        raise InvalidParams(f"frames must be >= 1, got {p.frames}")
    if p.fps <= 0:
        raise InvalidParams(f"fps must be positive, got {p.fps}")
    if not (0.0 <= p.limp_asym <= 1.0):
        raise InvalidParams(f"limp_asym must be in [0, 1], got {p.limp_asym}")
    if p.width < 64 or p.height < 64:
        raise InvalidParams(f"frame {p.width}x{p.height} too small (min 64x64)")
    if p.width % 2 != 0:
        raise InvalidParams(f"width must be even for exact mirror symmetry, got {p.width}")
    if p.stride_hz <= 0:
        raise InvalidParams(f"stride_hz must be positive, got {p.stride_hz}")
    if p.swing_amp < 0 or p.sole_pad_px < 0 or p.noise_mm < 0:
        raise InvalidParams("swing_amp, sole_pad_px, noise_mm must be non-negative")
    if not (400.0 <= p.depth_base <= 9000.0):
        raise InvalidParams(f"depth_base must be in [400, 9000] mm, got {p.depth_base}")


class _Layout:
    """Body geometry derived from the frame size, in pixel units.

    Column positions are kept as offsets from the vertical center axis;
    ``xoff[r, c] = c - center`` is exact because center is a half-integer.
    """

    def __init__(self, width: int, height: int):
        self.center = (width - 1) / 2.0
        self.ground_row = height - 8
        self.top_row = round(height * 0.09)
        body = self.ground_row - self.top_row
        self.head_r = 0.065 * body
        self.head_row = self.top_row + self.head_r
        self.shoulder_row = self.top_row + 0.19 * body
        self.hip_row = self.top_row + 0.52 * body
        self.shoulder_hw = 0.16 * width
        self.hip_hw = 0.115 * width
        self.neck_hw = 0.045 * width
        self.hip_dx = 0.48 * self.hip_hw
        self.leg_r = max(4.6, 0.025 * width)
        self.leg_top_row = self.hip_row - 4.0
        self.lean_amp = 0.03 * width
        self.rows = np.arange(height, dtype=np.float64)[:, None]
        cols = np.arange(width, dtype=np.float64)[None, :]
        self.xoff = cols - self.center


def _render_frame(params: SynthParams, geo: _Layout, phase: float, rng) -> tuple:
    sin_p = float(np.sin(phase))
    limp = params.limp_asym
    # the affected (right) leg swings less and drags behind in phase
    sin_lag = float(np.sin(phase - limp * (np.pi / 2.0)))
    swing = params.swing_amp * sin_p
    lean = limp * geo.lean_amp * sin_p

    buf = np.full((params.height, params.width), np.inf)

    # torso column shift is a shear: zero at the hips, full lean at the head
    def shear(row: float) -> float:
        w = (geo.hip_row - row) / (geo.hip_row - geo.head_row)
        return lean * min(max(w, 0.0), 1.0)

    base = params.depth_base
    leg_depth_l = base - DEPTH_SWING_MM * sin_p
    leg_depth_r = base + DEPTH_SWING_MM * (1.0 - limp) * sin_lag

    # head + neck + torso at the base depth
    head_off = shear(geo.head_row)
    _paint(buf, _disc_mask(geo, geo.head_row, head_off, geo.head_r), base)
    _paint(buf, _band_mask(geo, geo.head_row, geo.shoulder_row,
                           shear, lambda r: geo.neck_hw), base)
    hw_span = geo.hip_hw - geo.shoulder_hw

    def torso_hw(r):
        f = (r - geo.shoulder_row) / (geo.hip_row - geo.shoulder_row)
        return geo.shoulder_hw + hw_span * f

    _paint(buf, _band_mask(geo, geo.shoulder_row, geo.hip_row, shear, torso_hw), base)

    # legs: hip anchor fixed, foot swings laterally; the forward leg is nearer.
    # Offsets are written so the two sides are exact negations when limp = 0
    # (sin_lag == sin_p bit-for-bit when the lag term vanishes).
    foot_l = -geo.hip_dx + swing
    foot_r = geo.hip_dx - (1.0 - limp) * (params.swing_amp * sin_lag)
    left = (-geo.hip_dx, foot_l, leg_depth_l)
    right = (geo.hip_dx, foot_r, leg_depth_r)
    for hip_off, foot_off, depth in (left, right):
        mask = _capsule_mask(geo, geo.leg_top_row, hip_off,
                             geo.ground_row, foot_off, geo.leg_r)
        mask &= geo.rows <= geo.ground_row  # feet stay on the ground line
        _paint(buf, mask, depth)

    if params.sole_pad_px > 0:
        pad_mask = (
            (geo.rows >= geo.ground_row - (params.sole_pad_px - 1))
            & (geo.rows <= geo.ground_row)
            & (np.abs(geo.xoff - foot_r) <= geo.leg_r + 2.0)
        )
        _paint(buf, pad_mask, leg_depth_r)

    # raised bumps: the depth texture the keypoint detector responds to
    for row, off, surface in _bump_sites(geo, shear, foot_l, foot_r,
                                         leg_depth_l, leg_depth_r, base):
        _paint(buf, _disc_mask(geo, row, off, 1.4), surface - BUMP_RAISE_MM)

    fg = np.isfinite(buf)
    depth = np.where(fg, buf, 0.0)
    if params.noise_mm > 0:
        noise = rng.normal(0.0, params.noise_mm, size=depth.shape)
        depth = np.where(fg, depth + noise, 0.0)
    depth = np.where(fg, np.clip(np.rint(depth), 200.0, 10000.0), 0.0)
    return depth.astype(np.uint16), head_off


def _bump_sites(geo, shear, foot_l, foot_r, leg_depth_l, leg_depth_r, base):
    """(row, column offset, surface depth) for each raised bump."""
    torso_span = geo.hip_row - geo.shoulder_row
    sh_row = geo.shoulder_row + 5.0
    sh_dx = geo.shoulder_hw - 7.0
    chest_a = geo.shoulder_row + 0.28 * torso_span
    chest_b = geo.shoulder_row + 0.58 * torso_span
    chest_dx = 0.45 * geo.hip_hw
    sites = [
        (geo.head_row, shear(geo.head_row), base),
        (sh_row, -sh_dx + shear(sh_row), base),
        (sh_row, sh_dx + shear(sh_row), base),
        (chest_a, -chest_dx + shear(chest_a), base),
        (chest_a, chest_dx + shear(chest_a), base),
        (chest_b, -chest_dx + shear(chest_b), base),
        (chest_b, chest_dx + shear(chest_b), base),
        (geo.hip_row - 3.0, -geo.hip_dx, base),
        (geo.hip_row - 3.0, geo.hip_dx, base),
    ]
    for hip_off, foot_off, depth in ((-geo.hip_dx, foot_l, leg_depth_l),
                                     (geo.hip_dx, foot_r, leg_depth_r)):
        for t in (0.5, 0.86):  # knee and ankle, fractions along the leg axis
            row = geo.leg_top_row + t * (geo.ground_row - geo.leg_top_row)
            off = hip_off + t * (foot_off - hip_off)
            sites.append((row, off, depth))
    return sites


def _paint(buf: np.ndarray, mask: np.ndarray, depth: float) -> None:
    np.minimum(buf, np.where(mask, depth, np.inf), out=buf)


def _disc_mask(geo, row: float, off: float, radius: float) -> np.ndarray:
    dr = geo.rows - row
    dc = geo.xoff - off
    return dr * dr + dc * dc <= radius * radius


def _band_mask(geo, row0: float, row1: float, center_fn, halfwidth_fn) -> np.ndarray:
    n = geo.rows.shape[0]
    centers = np.zeros(n)
    hws = np.full(n, -1.0)
    lo, hi = int(np.floor(row0)), int(np.ceil(row1))
    for r in range(max(lo, 0), min(hi + 1, n)):
        if row0 <= r <= row1:
            centers[r] = center_fn(float(r))
            hws[r] = halfwidth_fn(float(r))
    return np.abs(geo.xoff - centers[:, None]) <= hws[:, None]


def _capsule_mask(geo, r0, off0, r1, off1, radius) -> np.ndarray:
    vr, vc = r1 - r0, off1 - off0
    norm2 = vr * vr + vc * vc
    t = ((geo.rows - r0) * vr + (geo.xoff - off0) * vc) / norm2
    t = np.clip(t, 0.0, 1.0)
    dr = geo.rows - (r0 + t * vr)
    dc = geo.xoff - (off0 + t * vc)
    return dr * dr + dc * dc <= radius * radius
