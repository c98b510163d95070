"""Evaluation metrics: confusion matrix, macro precision/recall/f-beta.

Macro averages are unweighted means over the classes that actually occur
in the true labels.  Zero-denominator precision/recall are reported as 0
and flagged per class.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError


@dataclass
class ClassMetrics:
    class_id: int
    precision: float
    recall: float
    fbeta: float
    support: int
    degenerate: bool = False


@dataclass
class MetricsReport:
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_fbeta: float
    beta: float
    n_classes: int
    total: int
    per_class: list[ClassMetrics] = field(default_factory=list)
    top_confused_pairs: list[tuple[int, int, int]] = field(default_factory=list)
    model: str = ""
    batch_size: int = 0
    extra: dict = field(default_factory=dict)

    def summary_csv_row(self) -> str:
        return (
            f"{self.model},{self.batch_size},{self.accuracy:.6f},"
            f"{self.macro_precision:.6f},{self.macro_recall:.6f},"
            f"{self.macro_fbeta:.6f}"
        )

    def to_json(self) -> str:
        payload = {
            "model": self.model,
            "batch_size": self.batch_size,
            "accuracy": self.accuracy,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_fbeta": self.macro_fbeta,
            "beta": self.beta,
            "n_classes": self.n_classes,
            "total": self.total,
            "per_class": [vars(c) for c in self.per_class],
            "top_confused_pairs": [list(p) for p in self.top_confused_pairs],
        }
        payload.update(self.extra)
        return json.dumps(payload, indent=2, sort_keys=True)


SUMMARY_CSV_HEADER = "model,batch_size,accuracy,precision,recall,fbeta"


def confusion_matrix(true_labels, predicted_labels, n_classes: int) -> np.ndarray:
    """counts[t][p] = number of samples with true class t predicted as p."""
    true_labels = np.asarray(true_labels, dtype=np.int64)
    predicted_labels = np.asarray(predicted_labels, dtype=np.int64)
    if true_labels.shape != predicted_labels.shape or true_labels.ndim != 1:
        raise ValidationError(
            f"label arrays must be equal-length 1-D, got {true_labels.shape} "
            f"and {predicted_labels.shape}"
        )
    if true_labels.size:
        lo = min(true_labels.min(), predicted_labels.min())
        hi = max(true_labels.max(), predicted_labels.max())
        if lo < 0 or hi >= n_classes:
            raise ValidationError(f"labels outside [0, {n_classes})")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (true_labels, predicted_labels), 1)
    return counts


def macro_metrics(cm: np.ndarray, beta: float = 1.0) -> MetricsReport:
    cm = np.asarray(cm, dtype=np.int64)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1] or cm.shape[0] == 0:
        raise ValidationError(f"confusion matrix must be square and non-empty: {cm.shape}")
    if beta <= 0:
        raise ValidationError(f"beta must be positive, got {beta}")
    total = int(cm.sum())
    if total == 0:
        raise ValidationError("confusion matrix has no samples")
    n_classes = cm.shape[0]
    tp = np.diag(cm).astype(np.float64)
    predicted = cm.sum(axis=0).astype(np.float64)
    actual = cm.sum(axis=1).astype(np.float64)
    per_class = []
    for c in range(n_classes):
        degenerate = False
        if predicted[c] > 0:
            precision = tp[c] / predicted[c]
        else:
            precision, degenerate = 0.0, True
        if actual[c] > 0:
            recall = tp[c] / actual[c]
        else:
            recall, degenerate = 0.0, True
        if precision == 0.0 and recall == 0.0:
            fbeta = 0.0
        else:
            b2 = beta * beta
            fbeta = (1 + b2) * precision * recall / (b2 * precision + recall)
        per_class.append(
            ClassMetrics(c, float(precision), float(recall), float(fbeta),
                         int(actual[c]), degenerate)
        )
    present = [m for m in per_class if m.support > 0]
    if not present:
        raise ValidationError("no class present in the true labels")
    return MetricsReport(
        accuracy=float(tp.sum() / total),
        macro_precision=float(np.mean([m.precision for m in present])),
        macro_recall=float(np.mean([m.recall for m in present])),
        macro_fbeta=float(np.mean([m.fbeta for m in present])),
        beta=beta,
        n_classes=n_classes,
        total=total,
        per_class=per_class,
        top_confused_pairs=[],
    )


def top_confused_pairs(cm: np.ndarray, k: int = 10) -> list[tuple[int, int, int]]:
    """Largest off-diagonal counts, descending; ties by (true, predicted)."""
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    cm = np.asarray(cm)
    pairs = [
        (int(t), int(p), int(cm[t, p]))
        for t in range(cm.shape[0])
        for p in range(cm.shape[1])
        if t != p and cm[t, p] > 0
    ]
    pairs.sort(key=lambda item: (-item[2], item[0], item[1]))
    return pairs[:k]


def evaluate_predictions(true_labels, predicted_labels, n_classes: int,
                         beta: float = 1.0, k_confused: int = 10) -> MetricsReport:
    cm = confusion_matrix(true_labels, predicted_labels, n_classes)
    report = macro_metrics(cm, beta)
    report.top_confused_pairs = top_confused_pairs(cm, k_confused)
    return report


def write_report(report: MetricsReport, json_path, csv_path=None) -> None:
    Path(json_path).write_text(report.to_json() + "\n")
    if csv_path is not None:
        Path(csv_path).write_text(
            SUMMARY_CSV_HEADER + "\n" + report.summary_csv_row() + "\n"
        )


def read_report(json_path) -> dict:
    return json.loads(Path(json_path).read_text())
