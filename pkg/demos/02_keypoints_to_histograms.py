#!/usr/bin/env python3
"""From depth frames to per-frame keypoint histograms.

Pipeline: full-ring segment test on the depth image -> 49-d raw feature per
keypoint (16 ring offset vectors in mm + body-height ratio) -> 3-d projection
-> quantization on a 5x5x5 grid -> unnormalized per-frame histogram. The
scalar fed to the sequence model is the number of occupancy bits that flip
between consecutive histograms.
"""

import numpy as np

import gaitscore as gs
from gaitscore import poi_features as pf


def main():
    params = gs.SynthParams(frames=28, seed=7, noise_mm=3.0)
    seq = gs.generate_walk(params)
    intr = seq.meta.intrinsics

    kps_per_frame = [gs.detect_keypoints(f, intr, threshold_mm=30.0)
                     for f in seq.frames]
    counts = [len(k) for k in kps_per_frame]
    print("keypoints per frame:", counts[: gs.stride_period_frames(params)])

    kp = kps_per_frame[0][0]
    f = gs.raw_feature(kp, seq.meta.head(0), seq.meta.ground(0))
    print(f"\nfirst keypoint at (row={kp.row}, col={kp.col}), depth {kp.p3d[2]:.0f} mm")
    print(f"raw feature: {f.shape[0]} dims, height ratio = {f[48]:.3f}")

    raw = [pf.frame_raw_features(k, seq.meta.head(t), seq.meta.ground(t))
           for t, k in enumerate(kps_per_frame)]
    pooled = np.concatenate(raw)
    pca = gs.fit_pca(pooled)
    print(f"\nfitted projection on {pooled.shape[0]} features; "
          f"leading eigenvalues = {np.round(pca.eigenvalues, 1)}")

    projected = [gs.project(pca, r) for r in raw]
    bounds = gs.fit_bounds(np.concatenate(projected), q=5)
    hists = [gs.build_histogram(p, bounds) for p in projected]
    h0 = hists[0]
    print(f"frame 0 histogram: {h0.bins.shape[0]} bins, "
          f"{np.count_nonzero(h0.bins)} occupied, mass = {h0.n_points}")

    deltas = gs.delta_sequence(hists)
    print("\noccupancy-bit deltas between consecutive frames:")
    print(deltas.values.astype(int))
    print("(periodic, like the gait itself: this is what the sequence model learns)")


if __name__ == "__main__":
    main()
