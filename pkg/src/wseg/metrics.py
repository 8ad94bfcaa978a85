"""Hard-segmentation extraction, confusion accumulation, and per-class IoU.

IoU follows the usual benchmark convention TP / (TP + FP + FN) computed from
a pixel confusion matrix; classes that appear in neither ground truth nor
prediction are reported as absent (NaN) and excluded from the mean.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Union

import numpy as np

from .types import DomainError, LabelSpace, LogitMap, ProbMap, SegMask

if TYPE_CHECKING:  # pragma: no cover
    from .em import EmReport


@dataclass(frozen=True)
class ConfusionMatrix:
    """Integer counts indexed [ground truth, prediction]; ignore pixels excluded."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.array(self.counts, dtype=np.int64, copy=True)
        c.setflags(write=False)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise DomainError(f"confusion matrix must be square, got shape {c.shape}")
        if (c < 0).any():
            raise DomainError("confusion counts must be nonnegative")
        object.__setattr__(self, "counts", c)

    @classmethod
    def zeros(cls, space: LabelSpace) -> "ConfusionMatrix":
        return cls(np.zeros((space.num_labels, space.num_labels), dtype=np.int64))

    @property
    def num_labels(self) -> int:
        return self.counts.shape[0]

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.counts + other.counts)


def hard_segmentation(scores: Union[ProbMap, LogitMap], space: LabelSpace) -> SegMask:
    """Per-pixel argmax; ties go to the lowest label id, invalid pixels to ignore."""
    if scores.num_labels != space.num_labels:
        raise DomainError(
            f"map has {scores.num_labels} labels, space has {space.num_labels}"
        )
    labels = scores.values.argmax(axis=-1).astype(np.int64)
    if isinstance(scores, ProbMap) and scores.valid is not None:
        labels[~scores.valid] = space.ignore_label
    return SegMask(labels, space)


def accumulate(cm: ConfusionMatrix, pred: SegMask, gt: SegMask) -> ConfusionMatrix:
    """Add one image's pixel counts; pixels whose ground truth is ignore are skipped."""
    if pred.values.shape != gt.values.shape:
        raise DomainError(
            f"prediction shape {pred.values.shape} does not match gt {gt.values.shape}"
        )
    n = cm.num_labels
    keep = gt.values != gt.space.ignore_label
    g = gt.values[keep]
    p = pred.values[keep]
    if p.size and (p.min() < 0 or p.max() >= n):
        raise DomainError("prediction contains labels outside the confusion matrix")
    counts = np.bincount(n * g + p, minlength=n * n).reshape(n, n)
    return ConfusionMatrix(cm.counts + counts)


def iou_scores(cm: ConfusionMatrix):
    """Per-class IoU vector (NaN where the class is absent) and their mean."""
    counts = cm.counts.astype(np.float64)
    tp = np.diag(counts)
    denom = counts.sum(axis=1) + counts.sum(axis=0) - tp
    with np.errstate(invalid="ignore"):
        iou = np.where(denom > 0, tp / np.where(denom > 0, denom, 1.0), np.nan)
    present = denom > 0
    miou = float(iou[present].mean()) if present.any() else float("nan")
    return iou, miou


def _fmt_pct(value: float) -> str:
    return "-" if np.isnan(value) else f"{100.0 * value:.1f}"


def report_table(report: "EmReport", space: LabelSpace) -> str:
    """Fixed-width per-stage, per-class IoU table in percent (one decimal).

    Output is bit-stable for a given report, so it can be golden-file tested.
    """
    headers = ["stage"] + list(space.all_names) + ["mIoU"]
    rows = []
    for stage in report.stages:
        cells = [stage.name]
        cells += [_fmt_pct(v) for v in stage.per_class_iou]
        cells.append(_fmt_pct(stage.miou))
        rows.append(cells)
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(headers)]
    def fmt_row(cells):
        left = cells[0].ljust(widths[0])
        rest = [c.rjust(widths[i + 1]) for i, c in enumerate(cells[1:])]
        return "  ".join([left] + rest)
    lines = [fmt_row(headers), fmt_row(["-" * w for w in widths])]
    lines += [fmt_row(r) for r in rows]
    return "\n".join(lines) + "\n"


def report_json(report: "EmReport", space: LabelSpace) -> dict:
    """JSON-ready dict: stage name, per-class IoU (null where absent), mIoU."""
    stages = []
    for stage in report.stages:
        per_class = [None if np.isnan(v) else float(v) for v in stage.per_class_iou]
        miou = None if np.isnan(stage.miou) else float(stage.miou)
        stages.append(
            {
                "name": stage.name,
                "per_class_iou": per_class,
                "miou": miou,
                "train_losses": [float(v) for v in stage.train_losses],
            }
        )
    return {
        "class_names": list(space.all_names),
        "stages": stages,
        "dataset_sizes": dict(report.dataset_sizes),
    }
