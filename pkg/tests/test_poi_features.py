"""Keypoint detection, raw features, PCA, quantization: oracle-checked."""

import numpy as np
import pytest

import gaitscore as gs
from gaitscore import poi_features as pf
from gaitscore.errors import (
    DegenerateCalibration,
    DegenerateCovarianceWarning,
    EmptyInput,
    InsufficientSamples,
)
from gaitscore.frames import DepthFrame, Intrinsics

INTR = Intrinsics(fx=360.0, fy=360.0, cx=31.5, cy=31.5)


def plate(value=1000, size=(64, 64)):
    g = np.zeros(size, dtype=np.uint16)
    g[4:-4, 4:-4] = value
    return g


def fast_oracle(depth, threshold):
    """Independent per-pixel reimplementation of the full-ring segment test."""
    h, w = depth.shape
    d = depth.astype(np.int64)
    hits = []
    for r in range(3, h - 3):
        for c in range(3, w - 3):
            if d[r, c] == 0:
                continue
            ring = [d[r + dr, c + dc] for dr, dc in pf.RING_OFFSETS]
            if any(v == 0 for v in ring):
                continue
            if all(v > d[r, c] + threshold for v in ring) \
                    or all(v < d[r, c] - threshold for v in ring):
                hits.append((r, c))
    return hits


class TestDetect:
    def test_constant_plate_has_no_contrast(self):
        frame = DepthFrame(depth=plate())
        assert gs.detect_keypoints(frame, INTR, 30.0) == []

    def test_single_raised_ring_pixel_detected(self):
        """Center at 1000, full ring at 1040, threshold 30 -> detected."""
        g = plate(1000)
        for dr, dc in pf.RING_OFFSETS:
            g[20 + dr, 20 + dc] = 1040
        frame = DepthFrame(depth=g)
        kps = gs.detect_keypoints(frame, INTR, 30.0)
        assert (20, 20) in [(k.row, k.col) for k in kps]
        # brute-force oracle over every pixel agrees exactly
        assert [(k.row, k.col) for k in kps] == fast_oracle(g, 30)

    def test_background_ring_pixel_discards(self):
        g = plate(1000)
        for dr, dc in pf.RING_OFFSETS:
            g[20 + dr, 20 + dc] = 1040
        g[20 - 3, 20] = 0  # one ring pixel in the background
        kps = gs.detect_keypoints(DepthFrame(depth=g), INTR, 30.0)
        assert (20, 20) not in [(k.row, k.col) for k in kps]
        assert [(k.row, k.col) for k in kps] == fast_oracle(g, 30)

    def test_threshold_is_strict_margin(self):
        g = plate(1000)
        for dr, dc in pf.RING_OFFSETS:
            g[20 + dr, 20 + dc] = 1030  # exactly at depth + threshold: not greater
        kps = gs.detect_keypoints(DepthFrame(depth=g), INTR, 30.0)
        assert (20, 20) not in [(k.row, k.col) for k in kps]

    def test_darker_corner_detected_too(self):
        g = plate(1000)
        for dr, dc in pf.RING_OFFSETS:
            g[20 + dr, 20 + dc] = 950
        kps = gs.detect_keypoints(DepthFrame(depth=g), INTR, 30.0)
        assert (20, 20) in [(k.row, k.col) for k in kps]

    def test_matches_oracle_on_random_texture(self):
        rng = np.random.default_rng(3)
        g = np.zeros((48, 48), dtype=np.uint16)
        g[4:-4, 4:-4] = rng.integers(900, 1100, size=(40, 40))
        g[rng.random((48, 48)) < 0.05] = 0  # background holes
        kps = gs.detect_keypoints(DepthFrame(depth=g), INTR, 30.0)
        assert [(k.row, k.col) for k in kps] == fast_oracle(g, 30)

    def test_translation_equivariance(self):
        g = plate(1000, size=(64, 64))
        for dr, dc in pf.RING_OFFSETS:
            g[24 + dr, 24 + dc] = 1045
        shifted = np.zeros_like(g)
        shifted[5:, 3:] = g[:-5, :-3]
        a = [(k.row, k.col) for k in gs.detect_keypoints(DepthFrame(depth=g), INTR, 30.0)]
        b = [(k.row, k.col)
             for k in gs.detect_keypoints(DepthFrame(depth=shifted), INTR, 30.0)]
        assert [(r + 5, c + 3) for r, c in a] == b

    def test_deterministic_ordering(self):
        seq = gs.generate_walk(gs.SynthParams(frames=1, seed=6, noise_mm=4.0))
        k1 = gs.detect_keypoints(seq.frames[0], seq.meta.intrinsics, 30.0)
        k2 = gs.detect_keypoints(seq.frames[0], seq.meta.intrinsics, 30.0)
        assert [(k.row, k.col) for k in k1] == [(k.row, k.col) for k in k2]
        rc = [(k.row, k.col) for k in k1]
        assert rc == sorted(rc)  # row-major

    def test_back_projection_pinhole(self):
        g = plate(1000)
        for dr, dc in pf.RING_OFFSETS:
            g[20 + dr, 20 + dc] = 1040
        kps = gs.detect_keypoints(DepthFrame(depth=g), INTR, 30.0)
        kp = next(k for k in kps if (k.row, k.col) == (20, 20))
        assert kp.p3d[2] == 1000.0
        np.testing.assert_allclose(kp.p3d[0], (20 - INTR.cx) * 1000.0 / INTR.fx)
        np.testing.assert_allclose(kp.p3d[1], (20 - INTR.cy) * 1000.0 / INTR.fy)
        # ring points use their own depth
        assert np.all(kp.ring_3d[:, 2] == 1040.0)


def make_kp(p3d, ring_3d, row=10, col=10):
    return pf.KeyPoint(row=row, col=col,
                       ring_px=np.zeros((16, 2), dtype=np.int64),
                       p3d=np.asarray(p3d, dtype=np.float64),
                       ring_3d=np.asarray(ring_3d, dtype=np.float64))


class TestRawFeature:
    def test_ring_offsets_are_differences(self):
        ring = np.tile([0.0, 0.0, 1000.0], (16, 1))
        ring[4] = [10.0, -5.0, 1040.0]
        kp = make_kp([0.0, 0.0, 1000.0], ring, row=50)
        f = gs.raw_feature(kp, head_px=(10.0, 0.0), ground_row=100)
        np.testing.assert_array_equal(f[12:15], [10.0, -5.0, 40.0])
        assert f.shape == (49,)

    def test_height_ratio_head_and_ground(self):
        ring = np.tile([0.0, 0.0, 1000.0], (16, 1))
        kp_head = make_kp([0, 0, 1000], ring, row=10)
        kp_ground = make_kp([0, 0, 1000], ring, row=100)
        assert gs.raw_feature(kp_head, (10.0, 0.0), 100)[48] == 1.0
        assert gs.raw_feature(kp_ground, (10.0, 0.0), 100)[48] == 0.0

    def test_ratio_clamped(self):
        ring = np.tile([0.0, 0.0, 1000.0], (16, 1))
        kp_above = make_kp([0, 0, 1000], ring, row=2)   # above the head
        kp_below = make_kp([0, 0, 1000], ring, row=120)  # below the ground
        assert gs.raw_feature(kp_above, (10.0, 0.0), 100)[48] == 1.0
        assert gs.raw_feature(kp_below, (10.0, 0.0), 100)[48] == 0.0

    def test_degenerate_calibration(self):
        ring = np.tile([0.0, 0.0, 1000.0], (16, 1))
        kp = make_kp([0, 0, 1000], ring, row=10)
        with pytest.raises(DegenerateCalibration):
            gs.raw_feature(kp, (40.0, 0.0), 40)


class TestPca:
    def test_exact_subspace_reconstructs(self):
        rng = np.random.default_rng(0)
        center = rng.normal(size=49)
        dirs = np.linalg.qr(rng.normal(size=(49, 3)))[0].T
        coef = rng.normal(size=(200, 3)) * [5.0, 2.0, 1.0]
        x = center + coef @ dirs
        pca = gs.fit_pca(x)
        v = gs.project(pca, x)
        recon = pca.mean + v @ pca.basis
        assert np.max(np.abs(recon - x)) < 1e-9

    def test_planted_covariance_eigenvalues(self):
        """diag(9,4,1,0.01,...) data: eigenvalues within 15%, axes aligned."""
        rng = np.random.default_rng(42)
        scales = np.full(49, 0.1)
        scales[:3] = [3.0, 2.0, 1.0]  # variances 9, 4, 1
        x = rng.normal(size=(200, 49)) * scales
        pca = gs.fit_pca(x)
        np.testing.assert_allclose(pca.eigenvalues, [9.0, 4.0, 1.0], rtol=0.15)
        for i in range(3):
            assert abs(pca.basis[i, i]) > 0.95
        # independent eigen-solver oracle on the explicit sample covariance
        cov = np.cov(x.T)
        ev = np.sort(np.linalg.eigvals(cov).real)[::-1][:3]
        np.testing.assert_allclose(pca.eigenvalues, ev, rtol=1e-8)

    def test_project_mean_is_origin(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(80, 49))
        pca = gs.fit_pca(x)
        np.testing.assert_allclose(gs.project(pca, pca.mean), 0.0, atol=1e-9)

    def test_project_basis_row_is_unit_coordinate(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(80, 49))
        pca = gs.fit_pca(x)
        v = gs.project(pca, pca.mean + pca.basis[0])
        np.testing.assert_allclose(v, [1.0, 0.0, 0.0], atol=1e-9)

    def test_project_matches_triple_loop_oracle(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(60, 49))
        pca = gs.fit_pca(x)
        f = rng.normal(size=49)
        got = gs.project(pca, f)
        want = np.zeros(3)
        for i in range(3):
            for j in range(49):
                want[i] += pca.basis[i, j] * (f[j] - pca.mean[j])
        np.testing.assert_allclose(got, want, atol=1e-9)

    def test_orthonormal_after_every_fit(self):
        rng = np.random.default_rng(4)
        for _ in range(5):
            x = rng.normal(size=(70, 49)) * rng.uniform(0.1, 5.0, size=49)
            pca = gs.fit_pca(x)
            gram = pca.basis @ pca.basis.T
            assert np.max(np.abs(gram - np.eye(3))) <= 1e-9
            assert np.all(np.diff(pca.eigenvalues) <= 0)

    def test_sign_convention(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(80, 49))
        pca = gs.fit_pca(x)
        for row in pca.basis:
            assert row[np.argmax(np.abs(row))] >= 0

    def test_insufficient_samples(self):
        with pytest.raises(InsufficientSamples):
            gs.fit_pca(np.zeros((49, 49)))

    def test_degenerate_covariance_padded_with_warning(self):
        rng = np.random.default_rng(6)
        coef = rng.normal(size=(100, 2))
        dirs = np.zeros((2, 49))
        dirs[0, 0] = dirs[1, 1] = 1.0
        x = coef @ dirs  # rank 2: only two informative directions
        with pytest.warns(DegenerateCovarianceWarning):
            pca = gs.fit_pca(x)
        gram = pca.basis @ pca.basis.T
        assert np.max(np.abs(gram - np.eye(3))) <= 1e-9


def quantize_oracle(v, mins, maxs, eps, q):
    """Independent scalar re-implementation of the flat-index formula."""
    idx = 0
    for j in range(3):
        x = min(max(v[j], mins[j]), maxs[j])
        cell = int(np.floor(q * (x - mins[j]) / (maxs[j] - mins[j] + eps[j])))
        idx += (q ** j) * cell
    return idx


class TestQuantization:
    def test_fit_bounds_trivial(self):
        b = gs.fit_bounds(np.array([[0.0, 0, 0], [1, 2, 3]]), q=5)
        np.testing.assert_array_equal(b.min, [0, 0, 0])
        np.testing.assert_array_equal(b.max, [1, 2, 3])

    def test_fit_bounds_single_vector_degenerate(self):
        b = gs.fit_bounds(np.array([[2.0, -1.0, 0.5]]), q=5)
        np.testing.assert_array_equal(b.min, b.max)
        assert gs.quantize_index([2.0, -1.0, 0.5], b) == 0

    def test_fit_bounds_matches_scan_oracle(self):
        rng = np.random.default_rng(7)
        v = rng.normal(size=(100, 3)) * [3, 1, 10]
        b = gs.fit_bounds(v, q=5)
        for j in range(3):
            lo, hi = v[0, j], v[0, j]
            for i in range(100):
                lo = min(lo, v[i, j])
                hi = max(hi, v[i, j])
            assert b.min[j] == lo and b.max[j] == hi

    def test_fit_bounds_empty(self):
        with pytest.raises(EmptyInput):
            gs.fit_bounds(np.empty((0, 3)), q=5)

    def test_min_maps_to_zero(self):
        b = gs.fit_bounds(np.array([[0.0, 0, 0], [1, 1, 1]]), q=5)
        assert gs.quantize_index([0.0, 0, 0], b) == 0

    def test_max_maps_to_last_cell(self):
        b = gs.fit_bounds(np.array([[0.0, 0, 0], [1, 1, 1]]), q=5)
        assert gs.quantize_index([1.0, 1, 1], b) == 124

    def test_hand_case_111(self):
        b = gs.fit_bounds(np.array([[0.0, 0, 0], [1, 1, 1]]), q=5)
        v = [0.3, 0.5, 0.9]
        assert gs.quantize_index(v, b) == 111
        assert quantize_oracle(v, b.min, b.max, b.eps, 5) == 111

    def test_fuzz_in_range_and_matches_oracle(self):
        rng = np.random.default_rng(8)
        train = rng.normal(size=(200, 3)) * [2, 5, 0.3]
        b = gs.fit_bounds(train, q=5)
        vs = rng.normal(size=(2000, 3)) * [20, 50, 3]  # mostly out of bounds
        idx, n_clamped = pf.quantize_many(vs, b)
        assert idx.min() >= 0 and idx.max() <= 124
        assert n_clamped > 0
        for i in range(0, 2000, 97):
            assert idx[i] == quantize_oracle(vs[i], b.min, b.max, b.eps, 5)


class TestHistogram:
    def bounds(self):
        return gs.fit_bounds(np.array([[0.0, 0, 0], [1, 1, 1]]), q=5)

    def test_empty_is_zero_histogram(self):
        h = gs.build_histogram(np.empty((0, 3)), self.bounds())
        assert h.n_points == 0
        assert h.bins.sum() == 0
        assert h.bins.shape == (125,)

    def test_identical_vectors_one_bin(self):
        v = np.tile([0.3, 0.5, 0.9], (7, 1))
        h = gs.build_histogram(v, self.bounds())
        assert h.bins[111] == 7
        assert h.bins.sum() == 7

    def test_matches_counting_oracle(self):
        rng = np.random.default_rng(9)
        b = self.bounds()
        vs = rng.random((50, 3))
        h = gs.build_histogram(vs, b)
        counts = np.zeros(125, dtype=int)
        for v in vs:
            counts[quantize_oracle(v, b.min, b.max, b.eps, 5)] += 1
        np.testing.assert_array_equal(h.bins, counts)

    def test_mass_conservation_with_clamping(self):
        rng = np.random.default_rng(10)
        b = self.bounds()
        vs = rng.normal(size=(300, 3)) * 10
        h = gs.build_histogram(vs, b)
        assert int(h.bins.sum()) == h.n_points == 300
        assert h.n_clamped > 0
