"""ROC points, equal error rate, and the evaluation harness."""

import numpy as np
import pytest

import gaitscore as gs
from gaitscore.errors import InsufficientData, SingleClassInput
from gaitscore.evaluation import LabeledScore, RocPoint

from conftest import make_walk


def samples(normal_scores, abnormal_scores):
    return ([LabeledScore(score=float(s), label="normal") for s in normal_scores]
            + [LabeledScore(score=float(s), label="abnormal") for s in abnormal_scores])


def confusion_oracle(normal_scores, abnormal_scores):
    """Brute-force confusion counts at every distinct threshold."""
    ths = [-np.inf] + sorted(set(list(normal_scores) + list(abnormal_scores))) + [np.inf]
    pts = []
    for th in ths:
        fp = sum(1 for s in normal_scores if s < th)
        fn = sum(1 for s in abnormal_scores if s >= th)
        pts.append((fp / len(normal_scores), fn / len(abnormal_scores), th))
    return pts


class TestRocPoints:
    def test_perfect_separation_has_zero_error_point(self):
        pts = gs.roc_points(samples([0.0, -0.1, -0.2], [-5.0, -4.0, -3.0]))
        assert any(p.fpr == 0.0 and p.fnr == 0.0 for p in pts)

    def test_all_equal_scores_degenerate_corners(self):
        pts = gs.roc_points(samples([1.0, 1.0], [1.0, 1.0, 1.0]))
        assert {(p.fpr, p.fnr) for p in pts} == {(0.0, 1.0), (1.0, 0.0)}

    def test_six_mixed_samples_match_confusion_oracle(self):
        normal = [0.5, -0.3, 0.1]
        abnormal = [-0.4, 0.2, -1.0]
        pts = gs.roc_points(samples(normal, abnormal))
        oracle = confusion_oracle(normal, abnormal)
        assert len(pts) == len(oracle)
        for p, (fpr, fnr, th) in zip(pts, oracle):
            assert (p.fpr, p.fnr, p.threshold) == (fpr, fnr, th)

    def test_monotone_sweep_fuzz(self):
        rng = np.random.default_rng(0)
        for _ in range(30):
            n = samples(rng.normal(size=8), rng.normal(size=7))
            pts = gs.roc_points(n)
            fprs = [p.fpr for p in pts]
            fnrs = [p.fnr for p in pts]
            assert all(a <= b + 1e-15 for a, b in zip(fprs, fprs[1:]))
            assert all(a >= b - 1e-15 for a, b in zip(fnrs, fnrs[1:]))

    def test_brute_force_equivalence_upto_50(self):
        rng = np.random.default_rng(1)
        normal = list(rng.normal(size=27))
        abnormal = list(rng.normal(loc=-1.0, size=23))
        pts = gs.roc_points(samples(normal, abnormal))
        oracle = confusion_oracle(normal, abnormal)
        for p, o in zip(pts, oracle):
            assert (p.fpr, p.fnr) == (o[0], o[1])

    def test_single_class_rejected(self):
        with pytest.raises(SingleClassInput):
            gs.roc_points([LabeledScore(score=1.0, label="normal")])


class TestEer:
    def test_perfect_separation(self):
        pts = gs.roc_points(samples([0.0, -0.1], [-5.0, -4.0]))
        assert gs.eer(pts) == 0.0

    def test_identical_scores_mixed_labels(self):
        pts = gs.roc_points(samples([2.0, 2.0], [2.0, 2.0]))
        assert gs.eer(pts) == 0.5

    def test_hand_built_eight_sample_crossing(self):
        """Interpolation oracle computed by hand: exact crossing at 0.25."""
        normal = [0.9, 0.8, 0.7, 0.6]
        abnormal = [0.75, 0.65, 0.3, 0.2]
        pts = gs.roc_points(samples(normal, abnormal))
        assert gs.eer(pts) == pytest.approx(0.25, abs=1e-12)

    def test_interpolated_crossing(self):
        # normals at 1 and 2, abnormal at 0: sweep crosses between points
        pts = gs.roc_points(samples([1.0, 2.0], [0.0]))
        v = gs.eer(pts)
        assert 0.0 <= v <= 0.5

    def test_invariant_under_increasing_transform(self):
        rng = np.random.default_rng(2)
        normal = list(rng.normal(size=15))
        abnormal = list(rng.normal(loc=-0.8, size=12))
        base = gs.eer(gs.roc_points(samples(normal, abnormal)))
        for f in (lambda x: 3 * x + 2, np.tanh, lambda x: x ** 3):
            t = gs.eer(gs.roc_points(samples([f(np.float64(s)) for s in normal],
                                             [f(np.float64(s)) for s in abnormal])))
            assert t == pytest.approx(base, abs=1e-12)

    def test_eer_in_unit_interval_fuzz(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            pts = gs.roc_points(samples(rng.normal(size=6), rng.normal(size=5)))
            assert 0.0 <= gs.eer(pts) <= 1.0


class TestEvaluate:
    def test_training_set_sanity(self, small_model, train_seqs):
        labeled = train_seqs[:2] + [make_walk(seed=90, frames=48, limp=0.4),
                                    make_walk(seed=91, frames=48, limp=0.6)]
        report = gs.evaluate(small_model, labeled)
        assert np.isfinite(report.per_frame_eer)
        assert np.isfinite(report.per_sequence_eer)
        assert report.n_sequences == 4

    def test_window_totals_recounted(self, small_model):
        lengths = [12, 15, 20]
        seqs = [make_walk(seed=40 + i, frames=n) for i, n in enumerate(lengths)]
        seqs[0].label = "abnormal"  # need both classes
        w = small_model.config.window_w
        report = gs.evaluate(small_model, seqs)
        assert report.n_windows == sum(n - w + 1 for n in lengths)

    def test_unlabeled_sequence_rejected(self, small_model):
        seq = make_walk(seed=50, frames=12, label="none")
        seq.label = None
        with pytest.raises(InsufficientData):
            gs.evaluate(small_model, [seq])

    def test_single_class_rejected(self, small_model):
        seqs = [make_walk(seed=51, frames=12), make_walk(seed=52, frames=12)]
        with pytest.raises(SingleClassInput):
            gs.evaluate(small_model, seqs)

    def test_report_dict_schema(self, small_model):
        seqs = [make_walk(seed=53, frames=12),
                make_walk(seed=54, frames=12, limp=0.5)]
        report = gs.evaluate(small_model, seqs)
        doc = report.to_dict()
        assert set(doc) == {"per_frame_eer", "per_sequence_eer", "n_sequences",
                            "n_windows", "runtime_s", "config_echo"}
        assert doc["config_echo"]["window_w"] == small_model.config.window_w

    def test_separation_gives_zero_eer(self, small_model):
        seqs = ([make_walk(seed=60 + i, frames=24) for i in range(2)]
                + [make_walk(seed=70 + i, frames=24, limp=0.5) for i in range(2)])
        report = gs.evaluate(small_model, seqs)
        assert report.per_sequence_eer == 0.0


class TestLabeledScore:
    def test_finite_required(self):
        with pytest.raises(ValueError):
            LabeledScore(score=float("inf"), label="normal")

    def test_label_checked(self):
        with pytest.raises(ValueError):
            LabeledScore(score=0.0, label="odd")
