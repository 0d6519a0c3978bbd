"""Shared fixtures: session timer, small synthetic corpora, a trained model."""

import time

import numpy as np
import pytest

import gaitscore as gs
from gaitscore.frames import DepthFrame, DepthSequence, Intrinsics, SequenceMeta

SESSION_START = time.perf_counter()


def make_walk(seed=0, limp=0.0, frames=48, stride=0.9, noise=3.0, sole=0,
              swing=8.0, label="auto"):
    """Synthetic walker with an attached label (auto: normal iff symmetric)."""
    params = gs.SynthParams(frames=frames, seed=seed, limp_asym=limp,
                            stride_hz=stride, noise_mm=noise, sole_pad_px=sole,
                            swing_amp=swing)
    seq = gs.generate_walk(params)
    if label == "auto":
        seq.label = "normal" if (limp == 0 and sole == 0) else "abnormal"
    else:
        seq.label = label
    return seq


def subsequence(seq, n):
    """Prefix of a sequence as a fresh DepthSequence."""
    meta = SequenceMeta(head_px=seq.meta.head_px[:n].copy(),
                        ground_row=seq.meta.ground_row[:n].copy(),
                        intrinsics=seq.meta.intrinsics,
                        fps=seq.meta.fps)
    return DepthSequence(frames=seq.frames[:n], meta=meta, label=seq.label)


def flat_plate_sequence(n_frames=12, size=(64, 64), depth_mm=2000):
    """Sequence of featureless solid plates: valid, but yields no keypoints."""
    h, w = size
    grid = np.zeros((h, w), dtype=np.uint16)
    grid[8:h - 8, 10:w - 10] = depth_mm
    frames = [DepthFrame(depth=grid.copy(), index=t) for t in range(n_frames)]
    meta = SequenceMeta(
        head_px=np.tile([10.0, (w - 1) / 2.0], (n_frames, 1)),
        ground_row=np.full(n_frames, h - 8),
        intrinsics=Intrinsics(fx=360.0, fy=360.0, cx=(w - 1) / 2, cy=(h - 1) / 2),
        fps=13.0,
    )
    return DepthSequence(frames=frames, meta=meta, label=None)


def assert_em_monotone(model, slack=1e-8):
    hist = np.asarray(model.ll_history if hasattr(model, "ll_history")
                      else model.hmm.ll_history)
    assert hist.size >= 1
    if hist.size > 1:
        assert np.min(np.diff(hist)) >= -slack, f"EM decreased: {np.diff(hist).min()}"


@pytest.fixture(scope="session")
def train_seqs():
    """Six symmetric training walkers with slightly varied stride."""
    return [make_walk(seed=i, frames=48, stride=0.8 + 0.05 * (i % 4)) for i in range(6)]


@pytest.fixture(scope="session")
def small_model(train_seqs):
    """One trained model shared by the non-acceptance tests."""
    config = gs.PipelineConfig(seed=0)
    model = gs.train(train_seqs, config)
    assert_em_monotone(model.hmm)
    return model
