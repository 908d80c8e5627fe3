"""Confusion matrix, per-class precision/recall/F1, and report rendering.

Matrix orientation is fixed: rows are true labels, columns are predicted
labels, both in canonical index order. Undefined metrics (empty row or
column) are reported as 0.0 with a flag so degenerate splits never divide
by zero. Rendered tables round to 3 decimals.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from fermix.labels import NUM_CLASSES, EmotionLabel


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray  # (7, 7) int64, rows true / cols predicted

    def __post_init__(self) -> None:
        arr = np.asarray(self.counts)
        if arr.shape != (NUM_CLASSES, NUM_CLASSES):
            raise ValueError(f"confusion matrix must be 7x7, got {arr.shape}")
        if (arr < 0).any():
            raise ValueError("confusion matrix entries must be non-negative")

    @property
    def n_samples(self) -> int:
        return int(self.counts.sum())

    def accuracy(self) -> float:
        total = self.n_samples
        if total == 0:
            raise ValueError("empty confusion matrix")
        return float(np.trace(self.counts)) / total

    def true_positives(self, label: EmotionLabel) -> int:
        return int(self.counts[label, label])

    def support(self, label: EmotionLabel) -> int:
        return int(self.counts[label].sum())


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int
    precision_defined: bool
    recall_defined: bool


@dataclass(frozen=True)
class MetricsReport:
    per_class: Mapping[EmotionLabel, ClassMetrics]
    accuracy: float


def confusion(
    true_labels: Sequence[EmotionLabel | int],
    pred_labels: Sequence[EmotionLabel | int],
) -> ConfusionMatrix:
    """Count (true, predicted) pairs into the 7x7 matrix."""
    if len(true_labels) != len(pred_labels):
        raise ValueError(
            f"label list lengths differ: {len(true_labels)} vs {len(pred_labels)}"
        )
    t = np.asarray([int(v) for v in true_labels], dtype=np.int64)
    p = np.asarray([int(v) for v in pred_labels], dtype=np.int64)
    if t.size and (t.min() < 0 or t.max() >= NUM_CLASSES or p.min() < 0 or p.max() >= NUM_CLASSES):
        raise ValueError("label index out of range [0, 6]")
    counts = np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64)
    np.add.at(counts, (t, p), 1)
    return ConfusionMatrix(counts=counts)


def f1_score(precision: float, recall: float) -> float:
    """Harmonic mean of precision and recall; 0 when both are 0."""
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def report(matrix: ConfusionMatrix) -> MetricsReport:
    """Per-class precision/recall/F1 and overall accuracy from the matrix."""
    if matrix.n_samples == 0:
        raise ValueError("cannot report on an empty confusion matrix")
    counts = matrix.counts
    per_class: dict[EmotionLabel, ClassMetrics] = {}
    for label in EmotionLabel:
        tp = int(counts[label, label])
        fp = int(counts[:, label].sum()) - tp
        fn = int(counts[label, :].sum()) - tp
        precision_defined = (tp + fp) > 0
        recall_defined = (tp + fn) > 0
        precision = tp / (tp + fp) if precision_defined else 0.0
        recall = tp / (tp + fn) if recall_defined else 0.0
        per_class[label] = ClassMetrics(
            precision=precision,
            recall=recall,
            f1=f1_score(precision, recall),
            support=tp + fn,
            precision_defined=precision_defined,
            recall_defined=recall_defined,
        )
    return MetricsReport(per_class=per_class, accuracy=matrix.accuracy())


def render_report_text(rep: MetricsReport) -> str:
    """Aligned text table: one row per class, 3 decimals, plus accuracy."""
    lines = [f"{'Emotion':<10} {'Precision':>9} {'Recall':>9} {'F1':>9} {'Support':>8}"]
    total = 0
    for label in EmotionLabel:
        m = rep.per_class[label]
        total += m.support
        flags = ""
        if not m.precision_defined or not m.recall_defined:
            flags = "  (undefined -> 0)"
        lines.append(
            f"{label.canonical_name:<10} {m.precision:>9.3f} {m.recall:>9.3f} "
            f"{m.f1:>9.3f} {m.support:>8d}{flags}"
        )
    lines.append(f"{'Accuracy':<10} {rep.accuracy:>9.3f} {'':>9} {'':>9} {total:>8d}")
    return "\n".join(lines) + "\n"


def report_to_record(rep: MetricsReport) -> dict:
    """Machine-readable form of a report (JSON-safe)."""
    return {
        "accuracy": rep.accuracy,
        "per_class": {
            label.canonical_name: {
                "precision": m.precision,
                "recall": m.recall,
                "f1": m.f1,
                "support": m.support,
                "precision_defined": m.precision_defined,
                "recall_defined": m.recall_defined,
            }
            for label, m in rep.per_class.items()
        },
    }


def record_to_report(record: dict) -> MetricsReport:
    """Inverse of ``report_to_record``; used when re-rendering stored results."""
    by_name = {label.canonical_name: label for label in EmotionLabel}
    per_class = {
        by_name[name]: ClassMetrics(
            precision=m["precision"],
            recall=m["recall"],
            f1=m["f1"],
            support=m["support"],
            precision_defined=m["precision_defined"],
            recall_defined=m["recall_defined"],
        )
        for name, m in record["per_class"].items()
    }
    return MetricsReport(per_class=per_class, accuracy=record["accuracy"])


def confusion_to_csv(matrix: ConfusionMatrix) -> str:
    """CSV grid with class-name headers; rows true, columns predicted."""
    names = [label.canonical_name for label in EmotionLabel]
    lines = ["true\\pred," + ",".join(names)]
    for label in EmotionLabel:
        row = ",".join(str(int(v)) for v in matrix.counts[label])
        lines.append(f"{label.canonical_name},{row}")
    return "\n".join(lines) + "\n"


def confusion_from_csv(text: str) -> ConfusionMatrix:
    rows = [line.split(",") for line in text.strip().splitlines()[1:]]
    counts = np.array([[int(v) for v in row[1:]] for row in rows], dtype=np.int64)
    return ConfusionMatrix(counts=counts)


def save_confusion_heatmap(
    matrix: ConfusionMatrix, path: Path | str, title: str | None = None
) -> Path:
    """Render the matrix as an annotated heatmap PNG (deterministic bytes)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    names = [label.canonical_name for label in EmotionLabel]
    counts = matrix.counts.astype(np.float64)
    row_sums = counts.sum(axis=1, keepdims=True)
    shares = np.divide(counts, row_sums, out=np.zeros_like(counts), where=row_sums > 0)

    fig, ax = plt.subplots(figsize=(6.0, 5.0))
    im = ax.imshow(shares, cmap="Blues", vmin=0.0, vmax=1.0)
    ax.set_xticks(range(NUM_CLASSES), names, rotation=45, ha="right")
    ax.set_yticks(range(NUM_CLASSES), names)
    ax.set_xlabel("Predicted")
    ax.set_ylabel("True")
    if title:
        ax.set_title(title)
    for r in range(NUM_CLASSES):
        for c in range(NUM_CLASSES):
            color = "white" if shares[r, c] > 0.5 else "black"
            ax.text(c, r, str(int(matrix.counts[r, c])), ha="center", va="center",
                    color=color, fontsize=8)
    fig.colorbar(im, ax=ax)
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=100, metadata={"Software": "fermix"})
    plt.close(fig)
    return path
