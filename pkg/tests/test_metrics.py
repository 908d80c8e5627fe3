import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fermix.labels import EmotionLabel
from fermix.metrics import (
    ConfusionMatrix,
    confusion,
    confusion_from_csv,
    confusion_to_csv,
    f1_score,
    render_report_text,
    report,
    report_to_record,
    save_confusion_heatmap,
)

from oracles import brute_force_class_metrics, brute_force_confusion

label_lists = st.lists(st.integers(min_value=0, max_value=6), min_size=1, max_size=200)


class TestConfusion:
    def test_identity_diagonal(self):
        m = confusion(list(range(7)), list(range(7)))
        assert np.trace(m.counts) == 7
        assert m.counts.sum() == 7

    def test_two_misclassified(self):
        m = confusion([0, 0], [1, 1])
        assert m.counts[0, 1] == 2
        assert m.counts.sum() == 2

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(99)
        t = rng.integers(0, 7, 1000).tolist()
        p = rng.integers(0, 7, 1000).tolist()
        assert np.array_equal(confusion(t, p).counts, brute_force_confusion(t, p))

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="lengths differ"):
            confusion([0, 1], [0])

    def test_label_out_of_range(self):
        with pytest.raises(ValueError, match="out of range"):
            confusion([0, 7], [0, 0])

    @given(label_lists, st.integers(min_value=0, max_value=2**31))
    @settings(max_examples=40, deadline=None)
    def test_joint_permutation_invariance(self, trues, seed):
        preds = list(reversed(trues))
        perm = np.random.default_rng(seed).permutation(len(trues))
        a = confusion(trues, preds)
        b = confusion([trues[i] for i in perm], [preds[i] for i in perm])
        assert np.array_equal(a.counts, b.counts)

    def test_negative_counts_rejected(self):
        with pytest.raises(ValueError):
            ConfusionMatrix(counts=np.full((7, 7), -1, dtype=np.int64))


class TestF1:
    def test_reference_rows_from_published_table(self):
        assert f1_score(0.809, 0.758) == pytest.approx(0.782, abs=1e-3)
        assert f1_score(0.849, 0.816) == pytest.approx(0.832, abs=1e-3)

    def test_zero_when_both_zero(self):
        assert f1_score(0.0, 0.0) == 0.0

    @given(st.floats(min_value=0.0, max_value=1.0), st.floats(min_value=0.0, max_value=1.0))
    def test_bounded_by_min_and_max(self, p, r):
        f1 = f1_score(p, r)
        assert 0.0 <= f1 <= max(p, r) + 1e-12
        if p > 0 and r > 0:
            assert f1 >= min(p, r) - 1e-12 or f1 <= max(p, r)


class TestReport:
    def test_perfect_diagonal(self):
        m = confusion(list(range(7)) * 3, list(range(7)) * 3)
        rep = report(m)
        assert rep.accuracy == 1.0
        for metrics in rep.per_class.values():
            assert metrics.precision == metrics.recall == metrics.f1 == 1.0

    def test_degenerate_class_flagged_as_zero(self):
        # nothing predicted as class 6 and nothing truly class 6
        t = [0] * 5
        p = [0] * 5
        rep = report(confusion(t, p))
        m6 = rep.per_class[EmotionLabel.SURPRISE]
        assert m6.precision == 0.0 and not m6.precision_defined
        assert m6.recall == 0.0 and not m6.recall_defined
        assert m6.f1 == 0.0

    def test_empty_matrix_errors(self):
        m = ConfusionMatrix(counts=np.zeros((7, 7), dtype=np.int64))
        with pytest.raises(ValueError):
            report(m)

    @given(label_lists, st.integers(min_value=0, max_value=2**31))
    @settings(max_examples=30, deadline=None)
    def test_matches_per_class_oracle(self, trues, seed):
        preds = np.random.default_rng(seed).integers(0, 7, len(trues)).tolist()
        rep = report(confusion(trues, preds))
        for label in EmotionLabel:
            want_p, want_r, want_f1 = brute_force_class_metrics(trues, preds, int(label))
            got = rep.per_class[label]
            assert got.precision == pytest.approx(want_p)
            assert got.recall == pytest.approx(want_r)
            assert got.f1 == pytest.approx(want_f1)

    @given(label_lists, st.integers(min_value=0, max_value=2**31))
    @settings(max_examples=30, deadline=None)
    def test_micro_average_identity(self, trues, seed):
        preds = np.random.default_rng(seed).integers(0, 7, len(trues)).tolist()
        m = confusion(trues, preds)
        rep = report(m)
        tp_total = sum(m.true_positives(label) for label in EmotionLabel)
        assert rep.accuracy == pytest.approx(tp_total / m.n_samples)

    def test_accuracy_between_recall_extremes_with_equal_support(self):
        rng = np.random.default_rng(4)
        trues = list(range(7)) * 40
        preds = [t if rng.random() < 0.7 else int(rng.integers(0, 7)) for t in trues]
        rep = report(confusion(trues, preds))
        recalls = [m.recall for m in rep.per_class.values()]
        assert min(recalls) - 1e-12 <= rep.accuracy <= max(recalls) + 1e-12


class TestRendering:
    def test_text_table_has_three_decimals(self):
        rep = report(confusion([0, 1, 2], [0, 1, 3]))
        text = render_report_text(rep)
        assert "1.000" in text and "0.667" in text
        assert text.splitlines()[0].startswith("Emotion")

    def test_record_round_trip_fields(self):
        rep = report(confusion([0, 1], [0, 1]))
        rec = report_to_record(rep)
        assert rec["accuracy"] == 1.0
        assert rec["per_class"]["Angry"]["f1"] == 1.0

    def test_csv_round_trip(self):
        m = confusion([0, 0, 3, 5], [1, 0, 3, 6])
        assert np.array_equal(confusion_from_csv(confusion_to_csv(m)).counts, m.counts)

    def test_heatmap_written_and_deterministic(self, tmp_path):
        m = confusion(list(range(7)) * 5, list(range(7)) * 5)
        p1 = save_confusion_heatmap(m, tmp_path / "a.png", title="t")
        p2 = save_confusion_heatmap(m, tmp_path / "b.png", title="t")
        assert p1.is_file() and p1.stat().st_size > 0
        assert p1.read_bytes() == p2.read_bytes()
