"""Confusion matrices, classification metrics, and report rendering."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataio import label_sort_key
from .errors import ConfigError

# Reference results (percent) for the eight classifiers evaluated on the
# same public dataset and trial split, for side-by-side context in reports.
# Columns: accuracy, precision, recall, F1.
REFERENCE_RESULTS = {
    "EVM": (91.0, 91.4, 91.0, 90.9),
    "SVM": (87.5, 87.9, 87.5, 87.6),
    "KNN": (89.0, 89.4, 89.0, 88.6),
    "DT": (44.0, 48.1, 44.0, 40.6),
    "RF": (62.5, 65.9, 62.5, 62.9),
    "LR": (51.0, 52.6, 51.0, 51.1),
    "GNB": (40.5, 43.0, 40.5, 38.9),
    "XGB": (76.0, 77.0, 76.0, 76.2),
}


@dataclass
class ConfusionMatrix:
    """Counts grid (rows = true class, columns = predicted class).

    Rejected (unknown) predictions are tallied per true class in
    ``unknown`` and excluded from the grid.
    """

    class_list: list
    counts: np.ndarray
    unknown: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        self.unknown = np.asarray(self.unknown, dtype=np.int64)
        c = len(self.class_list)
        if self.counts.shape != (c, c) or self.unknown.shape != (c,):
            raise ConfigError("confusion matrix shape does not match class list")
        if np.any(self.counts < 0) or np.any(self.unknown < 0):
            raise ConfigError("confusion matrix entries must be non-negative")

    @property
    def total(self) -> int:
        return int(self.counts.sum() + self.unknown.sum())


@dataclass
class EvalReport:
    """Percent-scale metrics, macro and support-weighted."""

    accuracy: float
    precision_macro: float
    recall_macro: float
    f1_macro: float
    precision_weighted: float
    recall_weighted: float
    f1_weighted: float
    per_class_accuracy: dict
    per_class_precision: dict
    per_class_recall: dict
    per_class_f1: dict
    unknown_count: int
    n_examples: int
    zero_prediction_classes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision_macro": self.precision_macro,
            "recall_macro": self.recall_macro,
            "f1_macro": self.f1_macro,
            "precision_weighted": self.precision_weighted,
            "recall_weighted": self.recall_weighted,
            "f1_weighted": self.f1_weighted,
            "per_class_accuracy": {str(k): v for k, v in self.per_class_accuracy.items()},
            "per_class_precision": {str(k): v for k, v in self.per_class_precision.items()},
            "per_class_recall": {str(k): v for k, v in self.per_class_recall.items()},
            "per_class_f1": {str(k): v for k, v in self.per_class_f1.items()},
            "unknown_count": self.unknown_count,
            "n_examples": self.n_examples,
            "zero_prediction_classes": [str(c) for c in self.zero_prediction_classes],
        }


def confuse(truth, predicted, class_list: list | None = None) -> ConfusionMatrix:
    """Tally a confusion matrix; ``None`` predictions count as unknown."""
    truth = list(truth)
    predicted = list(predicted)
    if len(truth) != len(predicted):
        raise ConfigError(
            f"truth and predictions differ in length ({len(truth)} vs {len(predicted)})"
        )
    if class_list is None:
        seen = set(truth) | {p for p in predicted if p is not None}
        class_list = sorted(seen, key=label_sort_key)
    index = {lab: i for i, lab in enumerate(class_list)}
    missing = [t for t in truth if t not in index]
    if missing:
        raise ConfigError(f"true label {missing[0]!r} not in class list")
    c = len(class_list)
    counts = np.zeros((c, c), dtype=np.int64)
    unknown = np.zeros(c, dtype=np.int64)
    for t, p in zip(truth, predicted):
        if p is None:
            unknown[index[t]] += 1
        elif p not in index:
            raise ConfigError(f"predicted label {p!r} not in class list")
        else:
            counts[index[t], index[p]] += 1
    return ConfusionMatrix(class_list=class_list, counts=counts, unknown=unknown)


def metrics(cm: ConfusionMatrix) -> EvalReport:
    """Accuracy, precision, recall, and F1 (macro and weighted), in percent.

    Rejected examples count against accuracy and recall.  Classes never
    predicted get precision 0 and are flagged in the report.
    """
    total = cm.total
    if total == 0:
        raise ConfigError("confusion matrix is empty")
    counts = cm.counts.astype(float)
    diag = np.diag(counts)
    support = counts.sum(axis=1) + cm.unknown  # true examples per class
    col_sum = counts.sum(axis=0)

    # Everything is computed directly in percent (100 * a / b) so the values
    # match hand arithmetic bit for bit on small integer fixtures.
    precision = np.where(col_sum > 0, 100.0 * diag / np.where(col_sum == 0, 1, col_sum), 0.0)
    recall = np.where(support > 0, 100.0 * diag / np.where(support == 0, 1, support), 0.0)
    pr = precision + recall
    f1 = np.where(pr > 0, 2 * precision * recall / np.where(pr == 0, 1, pr), 0.0)

    weights = support / support.sum()
    report = EvalReport(
        accuracy=float(100.0 * diag.sum() / total),
        precision_macro=float(precision.mean()),
        recall_macro=float(recall.mean()),
        f1_macro=float(f1.mean()),
        precision_weighted=float((precision * weights).sum()),
        recall_weighted=float((recall * weights).sum()),
        f1_weighted=float((f1 * weights).sum()),
        per_class_accuracy={
            lab: float(r) for lab, r in zip(cm.class_list, recall)
        },
        per_class_precision={
            lab: float(p) for lab, p in zip(cm.class_list, precision)
        },
        per_class_recall={
            lab: float(r) for lab, r in zip(cm.class_list, recall)
        },
        per_class_f1={lab: float(v) for lab, v in zip(cm.class_list, f1)},
        unknown_count=int(cm.unknown.sum()),
        n_examples=total,
        zero_prediction_classes=[
            lab for lab, s in zip(cm.class_list, col_sum) if s == 0
        ],
    )
    return report


def render_report(
    named_reports: list[tuple[str, EvalReport]],
    fmt: str = "text",
    include_reference: bool = False,
) -> str:
    """Render classifier rows as a text table or a JSON document.

    The text table shows macro averages to one decimal place; the JSON form
    mirrors every report field at full precision.
    """
    if not named_reports:
        raise ConfigError("need at least one report to render")
    if fmt == "json":
        doc = {
            "reports": [
                {"name": name, **rep.to_dict()} for name, rep in named_reports
            ]
        }
        if include_reference:
            doc["reference_results"] = {
                name: dict(zip(("accuracy", "precision", "recall", "f1"), row))
                for name, row in REFERENCE_RESULTS.items()
            }
        return json.dumps(doc, indent=2, sort_keys=True)
    if fmt != "text":
        raise ConfigError(f"unknown report format {fmt!r}")
    header = f"{'Classifier':<14}{'Acc':>8}{'Prec':>8}{'Rec':>8}{'F1':>8}"
    lines = [header, "-" * len(header)]
    for name, rep in named_reports:
        lines.append(
            f"{name:<14}{rep.accuracy:>8.1f}{rep.precision_macro:>8.1f}"
            f"{rep.recall_macro:>8.1f}{rep.f1_macro:>8.1f}"
        )
    if include_reference:
        lines.append("")
        lines.append("Reference results (same dataset and split):")
        for name, (acc, prec, rec, f1) in REFERENCE_RESULTS.items():
            lines.append(f"{name:<14}{acc:>8.1f}{prec:>8.1f}{rec:>8.1f}{f1:>8.1f}")
    return "\n".join(lines)


def write_per_class_csv(report: EvalReport, path, header_comment: str | None = None) -> None:
    """Per-class accuracy CSV, one row per label."""
    lines = []
    if header_comment is not None:
        lines.append(f"# config: {header_comment}")
    lines.append("label,accuracy_pct")
    for lab, val in report.per_class_accuracy.items():
        lines.append(f"{lab},{val!r}")
    Path(path).write_text("\n".join(lines) + "\n")
