"""Segmentation metrics: confusion matrices, mIoU, mAcc, aAcc, directory evaluation."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import CategoryTable, LabelMap
from .errors import DimMismatchError, LabelOutOfRangeError, MissingPairError
from .mask_io import load_label_map

log = logging.getLogger("foodfuse.metrics")


@dataclass(frozen=True)
class ConfusionMatrix:
    """counts[g][p] = pixels with ground-truth class g predicted as p."""

    counts: np.ndarray  # (N, N) int64

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise DimMismatchError(f"confusion matrix must be square, got {counts.shape}")
        object.__setattr__(self, "counts", counts)

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def tp(self, i: int) -> int:
        return int(self.counts[i, i])

    def fp(self, i: int) -> int:
        return int(self.counts[:, i].sum() - self.counts[i, i])

    def fn(self, i: int) -> int:
        return int(self.counts[i, :].sum() - self.counts[i, i])

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.counts + other.counts)


def confusion_matrix(
    pred: LabelMap,
    gt: LabelMap,
    n_classes: int,
    ignore_ids: Iterable[int] = (),
) -> ConfusionMatrix:
    """Tally per-pixel (gt, pred) pairs; pixels whose gt is in ignore_ids are skipped."""
    if pred.data.shape != gt.data.shape:
        raise DimMismatchError(f"pred is {pred.data.shape}, gt is {gt.data.shape}")
    gt_flat = gt.data.ravel().astype(np.int64)
    pred_flat = pred.data.ravel().astype(np.int64)
    keep = np.ones(gt_flat.shape, dtype=bool)
    for ignored in ignore_ids:
        keep &= gt_flat != ignored
    gt_flat = gt_flat[keep]
    pred_flat = pred_flat[keep]
    for name, values in (("gt", gt_flat), ("pred", pred_flat)):
        if values.size and (values.min() < 0 or values.max() >= n_classes):
            raise LabelOutOfRangeError(
                f"{name} labels outside [0, {n_classes}): "
                f"min {values.min()}, max {values.max()}"
            )
    counts = np.bincount(n_classes * gt_flat + pred_flat, minlength=n_classes * n_classes)
    return ConfusionMatrix(counts.reshape(n_classes, n_classes))


def _class_fractions(cm: ConfusionMatrix, with_fp: bool) -> list[Fraction | None]:
    """Per-class TP/(TP+FP+FN) or TP/(TP+FN) as exact fractions; None when absent."""
    out: list[Fraction | None] = []
    for i in range(cm.n_classes):
        denom = cm.tp(i) + cm.fn(i) + (cm.fp(i) if with_fp else 0)
        out.append(Fraction(cm.tp(i), denom) if denom > 0 else None)
    return out


def _mean(fractions: Sequence[Fraction | None], strict_n: int | None) -> float:
    """Average the present classes exactly, then round to float once.

    With strict_n, absent classes count as zero and the divisor is N.
    """
    present = [f for f in fractions if f is not None]
    if not present:
        raise ValueError("no class is present in either prediction or ground truth")
    total = sum(present, Fraction(0))
    divisor = strict_n if strict_n is not None else len(present)
    return float(total / divisor)


def miou(cm: ConfusionMatrix, strict_n: bool = False) -> float:
    """Mean over classes of TP/(TP+FP+FN); classes absent everywhere are excluded
    unless strict_n divides by the full class count."""
    fractions = _class_fractions(cm, with_fp=True)
    return _mean(fractions, cm.n_classes if strict_n else None)


def macc(cm: ConfusionMatrix, strict_n: bool = False) -> float:
    """Mean over classes of TP/(TP+FN); classes with no ground-truth pixels are
    excluded unless strict_n divides by the full class count."""
    fractions = _class_fractions(cm, with_fp=False)
    return _mean(fractions, cm.n_classes if strict_n else None)


def aacc(cm: ConfusionMatrix) -> float:
    """Fraction of all evaluated pixels that are correctly classified."""
    total = cm.total
    if total == 0:
        raise ValueError("confusion matrix is empty")
    return float(Fraction(int(np.trace(cm.counts)), total))


@dataclass(frozen=True)
class ClassMetrics:
    category_id: int
    iou: float | None  # None when the class is absent from pred and gt
    acc: float | None  # None when the class has no ground-truth pixels
    tp: int
    fp: int
    fn: int


@dataclass(frozen=True)
class MetricReport:
    per_class: tuple[ClassMetrics, ...]
    miou: float
    macc: float
    aacc: float
    evaluated_classes: int
    pixels: int

    def to_dict(self) -> dict:
        return {
            "miou": self.miou,
            "macc": self.macc,
            "aacc": self.aacc,
            "evaluated_classes": self.evaluated_classes,
            "pixels": self.pixels,
            "per_class": [
                {
                    "category_id": c.category_id,
                    "iou": c.iou,
                    "acc": c.acc,
                    "tp": c.tp,
                    "fp": c.fp,
                    "fn": c.fn,
                }
                for c in self.per_class
            ],
        }

    def format_table(self, categories: CategoryTable | None = None) -> str:
        """Aligned text table: one row per class plus the aggregates."""
        rows = [("class", "name", "iou", "acc", "tp", "fp", "fn")]
        for c in self.per_class:
            name = ""
            if categories is not None:
                try:
                    name = categories.name(c.category_id)
                except KeyError:
                    name = "?"
            rows.append(
                (
                    str(c.category_id),
                    name,
                    "-" if c.iou is None else f"{c.iou:.4f}",
                    "-" if c.acc is None else f"{c.acc:.4f}",
                    str(c.tp),
                    str(c.fp),
                    str(c.fn),
                )
            )
        widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
        lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows]
        lines.append("")
        lines.append(
            f"mIoU {self.miou:.4f}  mAcc {self.macc:.4f}  aAcc {self.aacc:.4f}  "
            f"({self.evaluated_classes} classes, {self.pixels} pixels)"
        )
        return "\n".join(lines)


def report_from_matrix(cm: ConfusionMatrix, strict_n: bool = False) -> MetricReport:
    """Aggregate a confusion matrix into the full per-class and mean report."""
    iou_fracs = _class_fractions(cm, with_fp=True)
    acc_fracs = _class_fractions(cm, with_fp=False)
    per_class = tuple(
        ClassMetrics(
            category_id=i,
            iou=None if iou_fracs[i] is None else float(iou_fracs[i]),
            acc=None if acc_fracs[i] is None else float(acc_fracs[i]),
            tp=cm.tp(i),
            fp=cm.fp(i),
            fn=cm.fn(i),
        )
        for i in range(cm.n_classes)
    )
    return MetricReport(
        per_class=per_class,
        miou=miou(cm, strict_n=strict_n),
        macc=macc(cm, strict_n=strict_n),
        aacc=aacc(cm),
        evaluated_classes=sum(1 for f in iou_fracs if f is not None),
        pixels=cm.total,
    )


def evaluate_pair(
    pred: LabelMap,
    gt: LabelMap,
    n_classes: int,
    ignore_ids: Iterable[int] = (),
    strict_n: bool = False,
) -> MetricReport:
    """Metrics for a single prediction / ground-truth pair."""
    return report_from_matrix(confusion_matrix(pred, gt, n_classes, ignore_ids), strict_n=strict_n)


def evaluate_dir(
    pred_dir: str | Path,
    gt_dir: str | Path,
    categories: CategoryTable,
    ignore_ids: Iterable[int] = (),
    strict_n: bool = False,
) -> MetricReport:
    """Accumulate one global confusion matrix over all matching filenames.

    Every PNG must appear in both directories, otherwise MissingPairError.
    """
    pred_dir, gt_dir = Path(pred_dir), Path(gt_dir)
    pred_names = {p.name for p in pred_dir.glob("*.png")}
    gt_names = {p.name for p in gt_dir.glob("*.png")}
    if pred_names != gt_names:
        raise MissingPairError(
            f"unmatched files: pred-only {sorted(pred_names - gt_names)}, "
            f"gt-only {sorted(gt_names - pred_names)}"
        )
    if not pred_names:
        raise MissingPairError("no .png files to evaluate")
    n_classes = categories.semantic_class_count
    ignore_ids = tuple(ignore_ids)
    total: ConfusionMatrix | None = None
    for name in sorted(pred_names):
        cm = confusion_matrix(
            load_label_map(pred_dir / name),
            load_label_map(gt_dir / name),
            n_classes,
            ignore_ids,
        )
        total = cm if total is None else total + cm
    return report_from_matrix(total, strict_n=strict_n)
