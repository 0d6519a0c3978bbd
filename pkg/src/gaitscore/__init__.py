"""Gait-normality scoring from frontal-view depth silhouettes.

Two per-frame feature families are fused over a sliding window: histograms of
depth keypoints scored by a Gaussian-mixture HMM, and posture-symmetry
descriptors scored by left/right cross-correlation. A deterministic synthetic
walker generator supports desk-scale verification end to end.
"""

from .assessment import (
    AssessmentResult,
    FusionWeights,
    GaitModel,
    PipelineConfig,
    WindowScore,
    assess_sequence,
    extract_all,
    final_score,
    fit_weights,
    load_model,
    lops_score,
    model_to_json,
    save_model,
    train,
)
from .evaluation import EvalReport, LabeledScore, RocPoint, eer, evaluate, roc_points
from .frames import (
    DepthFrame,
    DepthSequence,
    Intrinsics,
    SequenceMeta,
    load_sequence,
    read_pgm16,
    save_sequence,
    validate_frame,
    write_pgm16,
)
from .lops_features import (
    LoPSFrameFeature,
    SeparationLine,
    compute_lops_feature,
    half_body_ratio,
    projection_histogram,
    quantize_projection,
    separation_line,
    split_silhouette,
)
from .poi_features import (
    KeyPoint,
    PcaModel,
    PoIHistogram,
    QuantBounds,
    build_histogram,
    detect_keypoints,
    fit_bounds,
    fit_pca,
    project,
    quantize_index,
    raw_feature,
)
from .sequence_models import (
    DeltaSequence,
    GmmHmm,
    delta_sequence,
    forward_log_likelihood,
    hamming_delta,
    poi_score,
    train_hmm,
    xcorr_similarity,
)
from .synthgait import SynthParams, generate_walk, stride_period_frames

__version__ = "0.1.0"
