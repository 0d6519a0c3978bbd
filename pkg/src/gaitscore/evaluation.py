"""ROC / equal-error-rate evaluation over labeled sequence sets.

Conventions: abnormal is the positive class, and a sample is predicted
positive when its score falls strictly below the threshold (lower score =
less normal). FPR therefore rises and FNR falls as the threshold sweeps up.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import List, NamedTuple

import numpy as np

from .assessment import GaitModel, assess_sequence
from .errors import InsufficientData, SingleClassInput

NORMAL = "normal"
ABNORMAL = "abnormal"


@dataclass(frozen=True)
class LabeledScore:
    """One score with its ground-truth label and provenance ids."""

    score: float
    label: str
    subject_id: str = ""
    sequence_id: str = ""

    def __post_init__(self):
        if not np.isfinite(self.score):
            raise ValueError(f"score must be finite, got {self.score}")
        if self.label not in (NORMAL, ABNORMAL):
            raise ValueError(f"label must be normal or abnormal, got {self.label!r}")


class RocPoint(NamedTuple):
    fpr: float
    fnr: float
    threshold: float


def roc_points(samples: List[LabeledScore]) -> List[RocPoint]:
    """One (FPR, FNR, threshold) triple per distinct threshold, plus sentinels.

    Raises:
        SingleClassInput: samples do not contain both labels.
    """
    normal = np.sort(np.array([s.score for s in samples if s.label == NORMAL]))
    abnormal = np.sort(np.array([s.score for s in samples if s.label == ABNORMAL]))
    if normal.size == 0 or abnormal.size == 0:
        raise SingleClassInput("need at least one sample of each label")

    scores = np.concatenate([normal, abnormal])
    thresholds = [-np.inf] + sorted(set(scores.tolist())) + [np.inf]
    points = []
    for th in thresholds:
        # predicted positive (abnormal) iff score < threshold
        fp = int(np.searchsorted(normal, th, side="left"))
        tp = int(np.searchsorted(abnormal, th, side="left"))
        fpr = fp / normal.size
        fnr = (abnormal.size - tp) / abnormal.size
        points.append(RocPoint(fpr=fpr, fnr=fnr, threshold=float(th)))
    return points


def eer(points: List[RocPoint]) -> float:
    """Equal error rate: the FPR = FNR crossing, linearly interpolated."""
    f = np.array([p.fpr for p in points])
    n = np.array([p.fnr for p in points])
    d = f - n
    idx = int(np.argmax(d >= 0))  # first point at or past the crossing
    if d[idx] == 0:
        return float(f[idx])
    f0, f1 = f[idx - 1], f[idx]
    n0, n1 = n[idx - 1], n[idx]
    t = (n0 - f0) / ((f1 - f0) - (n1 - n0))
    return float(f0 + t * (f1 - f0))


@dataclass
class EvalReport:
    """Per-frame and per-sequence equal error rates over a labeled test set."""

    per_frame_eer: float
    per_sequence_eer: float
    n_sequences: int
    n_windows: int
    runtime_s: float
    config_echo: dict

    def to_dict(self) -> dict:
        return {
            "per_frame_eer": self.per_frame_eer,
            "per_sequence_eer": self.per_sequence_eer,
            "n_sequences": self.n_sequences,
            "n_windows": self.n_windows,
            "runtime_s": self.runtime_s,
            "config_echo": self.config_echo,
        }


def evaluate(model: GaitModel, test_sequences: list, n_threads: int = 1) -> EvalReport:
    """Score a labeled test set and report per-frame and per-sequence EER.

    Every frame inherits its sequence's label; per-frame scores are the
    causal-window scores, per-sequence scores the window means.

    Raises:
        InsufficientData: an unlabeled sequence in the test set.
        SingleClassInput: only one label present.
    """
    start = time.perf_counter()
    frame_samples = []
    seq_samples = []
    n_windows = 0
    for i, seq in enumerate(test_sequences):
        if seq.label is None:
            raise InsufficientData(f"test sequence {i} is unlabeled")
        result = assess_sequence(model, seq, n_threads=n_threads)
        n_windows += len(result.windows)
        sid = str(i)
        seq_samples.append(LabeledScore(score=result.sequence_score,
                                        label=seq.label, sequence_id=sid))
        for frame_idx, score in result.frame_scores:
            frame_samples.append(LabeledScore(score=score, label=seq.label,
                                              sequence_id=sid,
                                              subject_id=str(frame_idx)))
    per_frame = eer(roc_points(frame_samples))
    per_sequence = eer(roc_points(seq_samples))
    runtime = time.perf_counter() - start

    cfg = model.config
    config_echo = {
        "fast_threshold_mm": cfg.fast_threshold_mm,
        "q": cfg.q,
        "window_w": cfg.window_w,
        "n_states": cfg.n_states,
        "n_mix": cfg.n_mix,
        "proj_bins": cfg.proj_bins,
        "hamming_mode": cfg.hamming_mode,
        "seed": cfg.seed,
    }
    return EvalReport(per_frame_eer=per_frame, per_sequence_eer=per_sequence,
                      n_sequences=len(test_sequences), n_windows=n_windows,
                      runtime_s=runtime, config_echo=config_echo)
