"""Annotation-consistency scoring: fine intents mapped to their categories
and compared against the original coarse labels."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from ..errors import ValidationError
from ..taxonomy import CATEGORIES, map_to_category

log = logging.getLogger(__name__)


@dataclass
class ConfusionMatrix:
    labels: list[str]
    counts: list[list[int]]  # rows = gold, columns = predicted

    def __post_init__(self):
        k = len(self.labels)
        if len(self.counts) != k or any(len(row) != k for row in self.counts):
            raise ValidationError("confusion matrix must be square over its labels")
        if any(c < 0 for row in self.counts for c in row):
            raise ValidationError("confusion counts must be non-negative")

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str]], labels: Sequence[str]) -> "ConfusionMatrix":
        index = {label: i for i, label in enumerate(labels)}
        counts = [[0] * len(labels) for _ in labels]
        for gold, predicted in pairs:
            if gold not in index:
                raise ValidationError(f"unknown gold label {gold!r}")
            if predicted not in index:
                raise ValidationError(f"unknown predicted label {predicted!r}")
            counts[index[gold]][index[predicted]] += 1
        return cls(labels=list(labels), counts=counts)

    def total(self) -> int:
        return sum(sum(row) for row in self.counts)

    def support(self, label: str) -> int:
        return sum(self.counts[self.labels.index(label)])

    def to_dict(self) -> dict:
        return {"labels": list(self.labels), "counts": [list(r) for r in self.counts]}


@dataclass
class ClassificationReport:
    per_class: dict[str, tuple[float, float, float]]  # label -> (P, R, F1)
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    macro_f1: float
    confusion: ConfusionMatrix
    n_items: int
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "per_class": {
                label: {"precision": p, "recall": r, "f1": f}
                for label, (p, r, f) in self.per_class.items()
            },
            "weighted_precision": self.weighted_precision,
            "weighted_recall": self.weighted_recall,
            "weighted_f1": self.weighted_f1,
            "macro_f1": self.macro_f1,
            "confusion": self.confusion.to_dict(),
            "n_items": self.n_items,
            "warnings": list(self.warnings),
        }


def report_from_confusion(confusion: ConfusionMatrix) -> ClassificationReport:
    """Per-class P/R/F1 plus support-weighted and macro aggregates.

    Zero denominators (a label never predicted, or absent from gold) score 0
    and add a warning, so aggregate laws stay well-defined.
    """
    warnings: list[str] = []
    per_class: dict[str, tuple[float, float, float]] = {}
    k = len(confusion.labels)
    total = confusion.total()
    if total == 0:
        raise ValidationError("cannot score an empty confusion matrix")

    weighted = [0.0, 0.0, 0.0]
    macro_f1 = 0.0
    for i, label in enumerate(confusion.labels):
        tp = confusion.counts[i][i]
        gold_total = sum(confusion.counts[i])
        pred_total = sum(confusion.counts[r][i] for r in range(k))
        if pred_total == 0:
            precision = 0.0
            warnings.append(f"{label}: precision undefined (never predicted); scored 0")
        else:
            precision = tp / pred_total
        if gold_total == 0:
            recall = 0.0
            warnings.append(f"{label}: recall undefined (no gold items); scored 0")
        else:
            recall = tp / gold_total
        if precision + recall == 0:
            f1 = 0.0
        else:
            f1 = 2 * precision * recall / (precision + recall)
        per_class[label] = (precision, recall, f1)
        weight = gold_total / total
        weighted[0] += weight * precision
        weighted[1] += weight * recall
        weighted[2] += weight * f1
        macro_f1 += f1
    macro_f1 /= k

    for message in warnings:
        log.warning("%s", message)
    return ClassificationReport(
        per_class=per_class,
        weighted_precision=weighted[0],
        weighted_recall=weighted[1],
        weighted_f1=weighted[2],
        macro_f1=macro_f1,
        confusion=confusion,
        n_items=total,
        warnings=warnings,
    )


def consistency_report(items: Sequence[tuple[str, str]]) -> ClassificationReport:
    """Score (gold coarse label, predicted fine intent) pairs.

    Predicted intents are mapped onto the four categories; the report is
    always over the full 4x4 category confusion matrix.
    """
    if not items:
        raise ValidationError("consistency_report needs at least one item")
    pairs = []
    for gold, predicted in items:
        if gold not in CATEGORIES:
            raise ValidationError(f"gold label {gold!r} is not one of {CATEGORIES}")
        pairs.append((gold, map_to_category(predicted)))
    confusion = ConfusionMatrix.from_pairs(pairs, CATEGORIES)
    return report_from_confusion(confusion)


def filter_single_edu(
    items: Sequence[tuple[tuple[str, int], tuple[str, str]]],
    single_edu_turn_keys: Iterable[tuple[str, int]],
) -> list[tuple[str, str]]:
    """Keep items whose parent turn produced exactly one EDU.

    ``items`` pairs a (dialog_id, turn_index) key with the (gold, predicted)
    labels; ``single_edu_turn_keys`` comes from the segmentation report.
    """
    wanted = {tuple(k) for k in single_edu_turn_keys}
    return [labels for key, labels in items if tuple(key) in wanted]
