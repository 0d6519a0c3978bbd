"""Sliding-window gait assessment: feature orchestration, score fusion, training.

A length-n sequence yields n - w + 1 overlapping windows of w consecutive
frames. Each window gets a keypoint-model score (HMM forward log-likelihood of
the histogram deltas inside the window) and a posture-symmetry score (log of
the mean left/right cross-correlation), fused by weights fit on training data:
the feature whose training scores sit closer to zero earns the larger weight.
"""

from __future__ import annotations

import json
import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from . import lops_features, poi_features, sequence_models
from .errors import (
    BothSumsZeroWarning,
    InsufficientData,
    NoTrainingWindows,
    SchemaViolation,
    SequenceTooShort,
    UnknownVersion,
    WindowTooShort,
)
from .frames import DepthSequence
from .lops_features import LoPSFrameFeature
from .poi_features import PcaModel, PoIHistogram, QuantBounds
from .sequence_models import DeltaSequence, GmmHmm

logger = logging.getLogger(__name__)

MODEL_FORMAT_VERSION = 1
LOPS_SCORE_FLOOR = 1e-12
MIN_WINDOW = 3
DEFAULT_THRESHOLD_MARGIN = 0.1


@dataclass(frozen=True)
class PipelineConfig:
    """All tunables of the pipeline, with the reference defaults."""

    fast_threshold_mm: float = 30.0
    q: int = 5
    window_w: int = 10
    n_states: int = 8
    n_mix: int = 3
    proj_bins: int = 10
    hamming_mode: str = "occupancy"
    seed: int = 0

    def __post_init__(self):
        if self.window_w < MIN_WINDOW:
            raise ValueError(f"window_w must be >= {MIN_WINDOW}, got {self.window_w}")
        for name in ("q", "n_states", "n_mix", "proj_bins"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.q < 2:
            raise ValueError(f"q must be >= 2, got {self.q}")
        if self.fast_threshold_mm <= 0:
            raise ValueError("fast_threshold_mm must be positive")
        if self.hamming_mode not in sequence_models.HAMMING_MODES:
            raise ValueError(f"hamming_mode must be one of {sequence_models.HAMMING_MODES}")


@dataclass(frozen=True)
class FusionWeights:
    """Convex weights of the two window scores."""

    w_poi: float
    w_lops: float

    def __post_init__(self):
        if self.w_poi < 0 or self.w_lops < 0:
            raise ValueError(f"weights must be non-negative: {self}")
        if self.w_poi + self.w_lops != 1.0:
            raise ValueError(f"weights must sum to 1 exactly: {self}")


@dataclass(frozen=True)
class WindowScore:
    """Scores of the window starting at ``start_frame`` (all <= 0)."""

    start_frame: int
    s_poi: float
    s_lops: float
    s_final: float


@dataclass
class GaitModel:
    """Trained bundle: projection, quantization, HMM, fusion, threshold."""

    config: PipelineConfig
    pca: PcaModel
    bounds: QuantBounds
    hmm: GmmHmm
    weights: FusionWeights
    threshold: float
    format_version: int = MODEL_FORMAT_VERSION


@dataclass
class AssessmentResult:
    """Windows, per-frame causal scores, and the sequence-level decision."""

    windows: List[WindowScore]
    frame_scores: List[Tuple[int, float]]  # (frame index, score of window ending there)
    sequence_score: float
    decision: str


def extract_all(seq: DepthSequence, pca: PcaModel, bounds: QuantBounds,
                config: PipelineConfig, n_threads: int = 1) -> list:
    """Per-frame (PoIHistogram, LoPSFrameFeature) pairs, order preserved.

    Frames are independent, so extraction may fan out over threads; the
    result is identical to the serial order either way.
    """
    intr = seq.meta.intrinsics

    def one(t: int):
        frame = seq.frames[t]
        head = seq.meta.head(t)
        ground = seq.meta.ground(t)
        kps = poi_features.detect_keypoints(frame, intr, config.fast_threshold_mm)
        raw = poi_features.frame_raw_features(kps, head, ground)
        projected = poi_features.project(pca, raw) if raw.shape[0] else raw
        hist = poi_features.build_histogram(projected, bounds)
        lops = lops_features.compute_lops_feature(frame, head, ground, k=config.proj_bins)
        return hist, lops

    indices = range(len(seq))
    if n_threads and n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            return list(pool.map(one, indices))
    return [one(t) for t in indices]


def lops_score(window_feats: List[LoPSFrameFeature]) -> float:
    """Posture-symmetry score of one window: log of mean max-lag correlation.

    Compares the left/right ratio sequences and, per projection bin, the
    left/right band-value sequences; the argument of the log is floored at
    1e-12, so a fully asymmetric window scores log(1e-12), never -inf.

    Raises:
        WindowTooShort: fewer than 3 frames.
    """
    w = len(window_feats)
    if w < MIN_WINDOW:
        raise WindowTooShort(f"window of {w} frames, need >= {MIN_WINDOW}")
    ratio_l = np.array([f.ratio_left for f in window_feats])
    ratio_r = np.array([f.ratio_right for f in window_feats])
    zeta = sequence_models.xcorr_similarity(ratio_l, ratio_r)
    k = window_feats[0].k
    left = np.stack([f.left_hist for f in window_feats])   # (w, k)
    right = np.stack([f.right_hist for f in window_feats])
    thetas = [sequence_models.xcorr_similarity(left[:, i], right[:, i]) for i in range(k)]
    value = 0.5 * (zeta + float(np.mean(thetas)))
    return float(np.log(max(value, LOPS_SCORE_FLOOR)))


def fit_weights(score_pairs) -> FusionWeights:
    """Fusion weights from training (s_poi, s_lops) pairs.

    The weight of the LoPS score is the PoI share of the summed magnitudes:
    the feature with the smaller summed |score| (closer to 0 on normal data)
    receives the larger weight. Both sums zero falls back to (0.5, 0.5) with
    a warning.

    Raises:
        NoTrainingWindows: no pairs given.
        ValueError: a positive score (scores must be clamped <= 0 upstream).
    """
    pairs = list(score_pairs)
    if not pairs:
        raise NoTrainingWindows("no training window scores")
    s_poi = np.array([p[0] for p in pairs], dtype=np.float64)
    s_lops = np.array([p[1] for p in pairs], dtype=np.float64)
    if np.any(s_poi > 0) or np.any(s_lops > 0):
        raise ValueError("window scores must be <= 0")
    sum_poi = float(s_poi.sum())
    sum_lops = float(s_lops.sum())
    if sum_poi == 0.0 and sum_lops == 0.0:
        warnings.warn("both score sums are zero; using weights (0.5, 0.5)",
                      BothSumsZeroWarning)
        return FusionWeights(w_poi=0.5, w_lops=0.5)
    w_lops = sum_poi / (sum_poi + sum_lops)
    return FusionWeights(w_poi=1.0 - w_lops, w_lops=w_lops)


def final_score(s_poi: float, s_lops: float, weights: FusionWeights) -> float:
    """Weighted sum of the two window scores."""
    return weights.w_poi * s_poi + weights.w_lops * s_lops


def _window_scores(hmm: GmmHmm, weights: Optional[FusionWeights],
                   hists: List[PoIHistogram], lops: List[LoPSFrameFeature],
                   config: PipelineConfig) -> List[WindowScore]:
    n = len(hists)
    w = config.window_w
    deltas = sequence_models.delta_sequence(hists, mode=config.hamming_mode)
    out = []
    for start in range(n - w + 1):
        window_deltas = DeltaSequence(values=deltas.values[start:start + w - 1],
                                      max_value=deltas.max_value)
        s_poi = sequence_models.poi_score(hmm, window_deltas)
        s_lops = lops_score(lops[start:start + w])
        s_final = final_score(s_poi, s_lops, weights) if weights is not None else 0.0
        out.append(WindowScore(start_frame=start, s_poi=s_poi,
                               s_lops=s_lops, s_final=s_final))
    return out


def assess_sequence(model: GaitModel, seq: DepthSequence,
                    n_threads: int = 1) -> AssessmentResult:
    """Score every window of a sequence and decide normal vs abnormal.

    The per-frame score of frame t (t >= w - 1) is the final score of the
    window ending at t; the sequence score is the mean over all windows; the
    decision is "normal" iff the sequence score is at or above the model
    threshold.

    Raises:
        SequenceTooShort: fewer frames than the window width.
    """
    n = len(seq)
    w = model.config.window_w
    if n < w:
        raise SequenceTooShort(f"{n} frames < window width {w}")
    feats = extract_all(seq, model.pca, model.bounds, model.config, n_threads=n_threads)
    hists = [h for h, _ in feats]
    lops = [l for _, l in feats]
    windows = _window_scores(model.hmm, model.weights, hists, lops, model.config)
    frame_scores = [(ws.start_frame + w - 1, ws.s_final) for ws in windows]
    sequence_score = float(np.mean([ws.s_final for ws in windows]))
    decision = "normal" if sequence_score >= model.threshold else "abnormal"
    return AssessmentResult(windows=windows, frame_scores=frame_scores,
                            sequence_score=sequence_score, decision=decision)


def train(sequences: List[DepthSequence], config: PipelineConfig = PipelineConfig(),
          threshold_margin: float = DEFAULT_THRESHOLD_MARGIN,
          n_threads: int = 1) -> GaitModel:
    """Fit the full model on normal-gait sequences.

    Stages: keypoint + raw-feature extraction on every training frame, basis
    fit, projection, quantization bounds, per-frame histograms, delta
    sequences, HMM training, training window scores, fusion weights, and the
    decision threshold (minimum training sequence score minus
    ``threshold_margin`` times the spread of training sequence scores).

    Raises:
        InsufficientData: no sequences, a sequence shorter than w + 1, or one
            labeled abnormal.
    """
    w = config.window_w
    if not sequences:
        raise InsufficientData("no training sequences")
    for i, seq in enumerate(sequences):
        if len(seq) < w + 1:
            raise InsufficientData(f"training sequence {i} has {len(seq)} frames, "
                                   f"need >= {w + 1}")
        if seq.label == "abnormal":
            raise InsufficientData(f"training sequence {i} is labeled abnormal")

    def stage_one(seq: DepthSequence):
        intr = seq.meta.intrinsics
        raw_per_frame = []
        lops_per_frame = []

        def one(t: int):
            frame = seq.frames[t]
            head = seq.meta.head(t)
            ground = seq.meta.ground(t)
            kps = poi_features.detect_keypoints(frame, intr, config.fast_threshold_mm)
            raw = poi_features.frame_raw_features(kps, head, ground)
            lops = lops_features.compute_lops_feature(frame, head, ground,
                                                      k=config.proj_bins)
            return raw, lops

        if n_threads and n_threads > 1:
            with ThreadPoolExecutor(max_workers=n_threads) as pool:
                results = list(pool.map(one, range(len(seq))))
        else:
            results = [one(t) for t in range(len(seq))]
        for raw, lops in results:
            raw_per_frame.append(raw)
            lops_per_frame.append(lops)
        return raw_per_frame, lops_per_frame

    extracted = [stage_one(seq) for seq in sequences]
    pooled_raw = np.concatenate(
        [raw for raw_frames, _ in extracted for raw in raw_frames]
        or [np.empty((0, poi_features.RAW_FEATURE_DIM))]
    )
    pca = poi_features.fit_pca(pooled_raw)

    projected_per_seq = []
    for raw_frames, _ in extracted:
        projected_per_seq.append([
            poi_features.project(pca, raw) if raw.shape[0]
            else np.empty((0, poi_features.PCA_DIM))
            for raw in raw_frames
        ])
    pooled_proj = np.concatenate(
        [p for frames in projected_per_seq for p in frames]
    )
    bounds = fit_bounds_from_projections(pooled_proj, config.q)

    hists_per_seq = []
    for frames in projected_per_seq:
        hists_per_seq.append([poi_features.build_histogram(p, bounds) for p in frames])

    delta_seqs = [sequence_models.delta_sequence(hists, mode=config.hamming_mode)
                  for hists in hists_per_seq]
    hmm = sequence_models.train_hmm(delta_seqs, n_states=config.n_states,
                                    n_mix=config.n_mix, seed=config.seed)

    all_pairs = []
    per_seq_means = []
    per_seq_scores = []
    for (raw_frames, lops_frames), hists in zip(extracted, hists_per_seq):
        ws = _window_scores(hmm, None, hists, lops_frames, config)
        pairs = [(s.s_poi, s.s_lops) for s in ws]
        all_pairs.extend(pairs)
        per_seq_scores.append(pairs)
    weights = fit_weights(all_pairs)

    for pairs in per_seq_scores:
        finals = [final_score(sp, sl, weights) for sp, sl in pairs]
        per_seq_means.append(float(np.mean(finals)))
    lo = min(per_seq_means)
    hi = max(per_seq_means)
    threshold = lo - threshold_margin * (hi - lo)

    return GaitModel(config=config, pca=pca, bounds=bounds, hmm=hmm,
                     weights=weights, threshold=threshold)


def fit_bounds_from_projections(projections: np.ndarray, q: int) -> QuantBounds:
    return poi_features.fit_bounds(projections, q=q)


# --- model persistence -----------------------------------------------------------

def model_to_json(model: GaitModel) -> str:
    """Canonical JSON text of a model (sorted keys, newline-terminated)."""
    doc = {
        "format_version": model.format_version,
        "config": {
            "fast_threshold_mm": model.config.fast_threshold_mm,
            "q": model.config.q,
            "window_w": model.config.window_w,
            "n_states": model.config.n_states,
            "n_mix": model.config.n_mix,
            "proj_bins": model.config.proj_bins,
            "hamming_mode": model.config.hamming_mode,
            "seed": model.config.seed,
        },
        "pca": {
            "mean": model.pca.mean.tolist(),
            "basis": model.pca.basis.tolist(),
            "eigenvalues": model.pca.eigenvalues.tolist(),
        },
        "bounds": {
            "min": model.bounds.min.tolist(),
            "max": model.bounds.max.tolist(),
            "q": model.bounds.q,
            "eps": model.bounds.eps.tolist(),
        },
        "hmm": {
            "pi": model.hmm.pi.tolist(),
            "trans": model.hmm.trans.tolist(),
            "mix_weights": model.hmm.mix_weights.tolist(),
            "mix_means": model.hmm.mix_means.tolist(),
            "mix_variances": model.hmm.mix_variances.tolist(),
        },
        "weights": {"w_poi": model.weights.w_poi, "w_lops": model.weights.w_lops},
        "threshold": model.threshold,
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def save_model(model: GaitModel, path) -> None:
    """Write a model as canonical JSON."""
    Path(path).write_text(model_to_json(model), encoding="utf-8")


def load_model(path) -> GaitModel:
    """Load and fully re-validate a serialized model.

    Raises:
        UnknownVersion: format_version is not recognized.
        SchemaViolation: missing keys, wrong shapes, or invariant failures.
    """
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise SchemaViolation(f"{path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaViolation(f"{path}: top-level value must be an object")
    version = doc.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise UnknownVersion(f"{path}: format_version {version!r}")
    try:
        cfg = doc["config"]
        config = PipelineConfig(
            fast_threshold_mm=float(cfg["fast_threshold_mm"]),
            q=int(cfg["q"]),
            window_w=int(cfg["window_w"]),
            n_states=int(cfg["n_states"]),
            n_mix=int(cfg["n_mix"]),
            proj_bins=int(cfg["proj_bins"]),
            hamming_mode=str(cfg["hamming_mode"]),
            seed=int(cfg["seed"]),
        )
        pca = PcaModel(
            mean=np.asarray(doc["pca"]["mean"], dtype=np.float64),
            basis=np.asarray(doc["pca"]["basis"], dtype=np.float64),
            eigenvalues=np.asarray(doc["pca"]["eigenvalues"], dtype=np.float64),
        )
        bounds = QuantBounds(
            min=np.asarray(doc["bounds"]["min"], dtype=np.float64),
            max=np.asarray(doc["bounds"]["max"], dtype=np.float64),
            q=int(doc["bounds"]["q"]),
            eps=np.asarray(doc["bounds"]["eps"], dtype=np.float64),
        )
        hmm = GmmHmm(
            pi=np.asarray(doc["hmm"]["pi"], dtype=np.float64),
            trans=np.asarray(doc["hmm"]["trans"], dtype=np.float64),
            mix_weights=np.asarray(doc["hmm"]["mix_weights"], dtype=np.float64),
            mix_means=np.asarray(doc["hmm"]["mix_means"], dtype=np.float64),
            mix_variances=np.asarray(doc["hmm"]["mix_variances"], dtype=np.float64),
        )
        weights = FusionWeights(w_poi=float(doc["weights"]["w_poi"]),
                                w_lops=float(doc["weights"]["w_lops"]))
        threshold = float(doc["threshold"])
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaViolation(f"{path}: {exc}") from exc

    try:
        if pca.mean.ndim != 1 or pca.basis.shape != (3, pca.mean.shape[0]):
            raise ValueError(f"basis shape {pca.basis.shape} does not match mean")
        pca.validate()
        bounds.validate()
        if bounds.q != config.q:
            raise ValueError("bounds q differs from config q")
        s, m = config.n_states, config.n_mix
        if hmm.pi.shape != (s,) or hmm.trans.shape != (s, s) \
                or hmm.mix_weights.shape != (s, m):
            raise ValueError("HMM parameter shapes do not match config")
        hmm.validate()
        if not np.isfinite(threshold):
            raise ValueError("threshold not finite")
    except ValueError as exc:
        raise SchemaViolation(f"{path}: {exc}") from exc

    return GaitModel(config=config, pca=pca, bounds=bounds, hmm=hmm,
                     weights=weights, threshold=threshold,
                     format_version=version)
