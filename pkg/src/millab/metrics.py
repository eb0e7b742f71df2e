"""Average precision, precision-recall curves, and bag-level aggregation.

AP is the non-interpolated step form: sort by descending score, take one
(precision, recall) point per distinct threshold (tied scores share a
threshold), and sum precision weighted by recall increments. This matches
the usual ``average_precision_score`` definition, is invariant under any
strictly increasing transform of the scores, and equals the positive
prevalence for constant scores.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ShapeError, UndefinedMetricError, ValidationError


@dataclass(frozen=True)
class PRCurve:
    """Stepwise precision-recall curve with its average-precision summary."""

    thresholds: np.ndarray  # descending, one per distinct score
    precisions: np.ndarray
    recalls: np.ndarray  # nondecreasing
    ap: float

    @property
    def points(self) -> list[tuple[float, float]]:
        """(recall, precision) pairs in threshold order."""
        return list(zip(self.recalls.tolist(), self.precisions.tolist()))

    def to_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["threshold", "precision", "recall"])
            for t, p, r in zip(self.thresholds, self.precisions, self.recalls):
                writer.writerow([repr(float(t)), repr(float(p)), repr(float(r))])


def average_precision(scores: np.ndarray, truth: np.ndarray) -> PRCurve:
    """Stepwise PR curve of ``scores`` ranked against binary ``truth``."""
    scores = np.asarray(scores, dtype=np.float64)
    truth = np.asarray(truth)
    if scores.shape != truth.shape or scores.ndim != 1:
        raise ShapeError(
            f"scores and truth must be equal-length vectors, got "
            f"{scores.shape} and {truth.shape}"
        )
    n_pos = int(np.sum(truth == 1))
    if n_pos == 0:
        raise UndefinedMetricError("average precision undefined without positives")

    order = np.argsort(-scores, kind="stable")
    s_sorted = scores[order]
    t_sorted = (truth[order] == 1).astype(np.int64)
    # last index of each tied-score group
    ends = np.flatnonzero(np.diff(s_sorted) != 0)
    ends = np.concatenate([ends, [len(s_sorted) - 1]])
    tp = np.cumsum(t_sorted)[ends]
    predicted_pos = ends + 1
    precisions = tp / predicted_pos
    recalls = tp / n_pos
    recall_steps = np.diff(np.concatenate([[0.0], recalls]))
    ap = float(np.sum(precisions * recall_steps))
    return PRCurve(
        thresholds=s_sorted[ends],
        precisions=precisions,
        recalls=recalls,
        ap=ap,
    )


def bag_max_score(instance_scores: np.ndarray) -> float:
    """Bag-level score: the maximum instance score."""
    scores = np.asarray(instance_scores, dtype=np.float64)
    if scores.size == 0:
        raise ValidationError("bag_max_score of an empty bag is undefined")
    return float(scores.max())


@dataclass(frozen=True)
class MAPReport:
    """Mean AP over labels; labels without a defined AP are excluded but counted."""

    mean_ap: float
    per_label: tuple[float | None, ...]
    n_defined: int
    n_undefined: int

    def to_json_dict(self) -> dict:
        return {
            "mean_ap": self.mean_ap,
            "per_label_ap": [ap for ap in self.per_label],
            "n_defined": self.n_defined,
            "n_undefined": self.n_undefined,
        }


def map_over_labels(curves: Sequence[PRCurve | None]) -> MAPReport:
    """Unweighted mean of per-label APs (``None`` marks an undefined label)."""
    aps = [c.ap if c is not None else None for c in curves]
    defined = [ap for ap in aps if ap is not None]
    if not defined:
        raise UndefinedMetricError("no label has a defined average precision")
    return MAPReport(
        mean_ap=float(np.mean(defined)),
        per_label=tuple(aps),
        n_defined=len(defined),
        n_undefined=len(aps) - len(defined),
    )
