"""Synthetic walker generator: determinism, symmetry, periodicity, limp knob."""

import numpy as np
import pytest

import gaitscore as gs
from gaitscore.errors import InvalidParams
from gaitscore.lops_features import half_body_ratio, separation_line, split_silhouette


def silhouettes(seq):
    return [f.foreground() for f in seq.frames]


class TestDeterminism:
    def test_identical_params_identical_bits(self):
        p = gs.SynthParams(frames=10, seed=11, noise_mm=5.0, limp_asym=0.3)
        a = gs.generate_walk(p)
        b = gs.generate_walk(p)
        for fa, fb in zip(a.frames, b.frames):
            assert np.array_equal(fa.depth, fb.depth)
        assert np.array_equal(a.meta.head_px, b.meta.head_px)
        assert np.array_equal(a.meta.ground_row, b.meta.ground_row)

    def test_seed_changes_noise(self):
        p1 = gs.SynthParams(frames=4, seed=1, noise_mm=5.0)
        p2 = gs.SynthParams(frames=4, seed=2, noise_mm=5.0)
        a, b = gs.generate_walk(p1), gs.generate_walk(p2)
        assert any(not np.array_equal(fa.depth, fb.depth)
                   for fa, fb in zip(a.frames, b.frames))


class TestSymmetry:
    def test_pixel_counts_balanced_every_frame(self):
        p = gs.SynthParams(frames=29, seed=2)
        seq = gs.generate_walk(p)
        w = p.width
        for fg in silhouettes(seq):
            left = int(fg[:, : w // 2].sum())
            right = int(fg[:, w // 2:].sum())
            assert abs(left - right) <= 1

    def test_phase_zero_ratio_exact(self):
        p = gs.SynthParams(frames=1, seed=0)
        seq = gs.generate_walk(p)
        line = separation_line(seq.meta.head(0), seq.meta.ground(0))
        left, right = split_silhouette(seq.frames[0], line)
        ratios = half_body_ratio(left, left | right)
        assert ratios == (0.5, 0.5)

    def test_noise_does_not_move_the_mask(self):
        clean = gs.generate_walk(gs.SynthParams(frames=6, seed=4, noise_mm=0.0))
        noisy = gs.generate_walk(gs.SynthParams(frames=6, seed=4, noise_mm=6.0))
        for a, b in zip(silhouettes(clean), silhouettes(noisy)):
            assert np.array_equal(a, b)


class TestPeriodicity:
    @pytest.mark.parametrize("stride", [0.9, 1.3, 0.65])
    def test_period_repeats_within_tolerance(self, stride):
        p = gs.SynthParams(frames=40, seed=1, stride_hz=stride)
        seq = gs.generate_walk(p)
        period = gs.stride_period_frames(p)
        sils = silhouettes(seq)
        for t in range(len(sils) - period):
            a, b = sils[t], sils[t + period]
            disagree = np.count_nonzero(a != b)
            assert disagree <= 0.02 * max(a.sum(), b.sum())

    def test_noise_free_period_exact(self):
        p = gs.SynthParams(frames=30, seed=1)
        seq = gs.generate_walk(p)
        period = gs.stride_period_frames(p)
        for t in range(len(seq) - period):
            assert np.array_equal(seq.frames[t].depth, seq.frames[t + period].depth)


class TestLimp:
    def test_limp_raises_mean_ratio_deviation(self):
        """Asymmetric swing must push the half-body ratio away from 0.5."""
        def mean_dev(limp):
            p = gs.SynthParams(frames=120, seed=7, limp_asym=limp)
            seq = gs.generate_walk(p)
            devs = []
            for t in range(len(seq)):
                line = separation_line(seq.meta.head(t), seq.meta.ground(t))
                left, right = split_silhouette(seq.frames[t], line)
                rl, _ = half_body_ratio(left, left | right)
                devs.append(abs(rl - 0.5))
            return float(np.mean(devs))

        assert mean_dev(0.4) > mean_dev(0.0)

    def test_sole_pad_adds_one_sided_mass(self):
        sym = gs.generate_walk(gs.SynthParams(frames=1, seed=0))
        pad = gs.generate_walk(gs.SynthParams(frames=1, seed=0, sole_pad_px=12))
        assert pad.frames[0].foreground().sum() > sym.frames[0].foreground().sum()


class TestMeta:
    def test_head_above_ground_and_arity(self):
        p = gs.SynthParams(frames=9, seed=0)
        seq = gs.generate_walk(p)
        assert len(seq.meta) == 9
        assert np.all(seq.meta.head_px[:, 0] < seq.meta.ground_row)
        assert seq.meta.fps == p.fps

    def test_depth_values_in_plausible_window(self):
        seq = gs.generate_walk(gs.SynthParams(frames=5, seed=3, noise_mm=8.0))
        for f in seq.frames:
            fg = f.depth[f.depth > 0]
            assert fg.min() >= 200 and fg.max() <= 10000


class TestInvalidParams:
    @pytest.mark.parametrize("kwargs", [
        {"frames": 0},
        {"frames": 5, "limp_asym": 1.5},
        {"frames": 5, "limp_asym": -0.1},
        {"frames": 5, "fps": 0.0},
        {"frames": 5, "width": 211},          # odd width breaks exact symmetry
        {"frames": 5, "width": 40, "height": 40},
        {"frames": 5, "noise_mm": -1.0},
        {"frames": 5, "stride_hz": 0.0},
        {"frames": 5, "depth_base": 150.0},
    ])
    def test_rejected(self, kwargs):
        with pytest.raises(InvalidParams):
            gs.generate_walk(gs.SynthParams(**kwargs))
