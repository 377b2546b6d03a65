"""Confusion-based change-detection metrics and oracle diagnostics.

Confusions are accumulated dataset-wide (sum TP/FP/FN over all pairs,
then divide once), and mean scores are unweighted means over all
non-background vocabulary classes, including classes that never appear.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import MaskSet
from .errors import LabelError, ShapeError
from .proposals import ChangeProposal, score_change
from .retrieval import RetrievalConfig, SemanticChangeMap, assign_categories, rasterize

MODES = ("standard", "oracle_identification", "oracle_change_proposal")


@dataclass
class ConfusionAccumulator:
    """Per-class TP/FP/FN pixel counts; class 0 is background."""

    n_classes: int  # vocabulary size including background
    tp: np.ndarray = None
    fp: np.ndarray = None
    fn: np.ndarray = None

    def __post_init__(self):
        if self.tp is None:
            self.tp = np.zeros(self.n_classes, dtype=np.int64)
            self.fp = np.zeros(self.n_classes, dtype=np.int64)
            self.fn = np.zeros(self.n_classes, dtype=np.int64)

    def add_raster(self, pred: np.ndarray, gt: np.ndarray) -> None:
        pred = np.asarray(pred)
        gt = np.asarray(gt)
        if pred.shape != gt.shape:
            raise ShapeError(f"pred {pred.shape} vs gt {gt.shape}")
        for name, raster in (("pred", pred), ("gt", gt)):
            bad = (raster < 0) | (raster >= self.n_classes)
            if bad.any():
                raise LabelError(
                    f"{name} raster contains labels outside the vocabulary "
                    f"(max valid {self.n_classes - 1})"
                )
        for c in range(self.n_classes):
            p = pred == c
            g = gt == c
            self.tp[c] += int((p & g).sum())
            self.fp[c] += int((p & ~g).sum())
            self.fn[c] += int((~p & g).sum())

    def add_binary(self, pred: np.ndarray, gt: np.ndarray) -> None:
        self.add_raster(np.asarray(pred).astype(np.int64), np.asarray(gt).astype(np.int64))

    def add_semantic(self, pred: SemanticChangeMap, gt_t1: np.ndarray, gt_t2: np.ndarray) -> None:
        self.add_raster(pred.t1, gt_t1)
        self.add_raster(pred.t2, gt_t2)

    def merge(self, other: "ConfusionAccumulator") -> None:
        if other.n_classes != self.n_classes:
            raise ShapeError("cannot merge accumulators with different vocabularies")
        self.tp += other.tp
        self.fp += other.fp
        self.fn += other.fn


@dataclass
class EvalReport:
    per_class: dict[int, dict[str, float]]  # class index -> {"iou", "f1"} in percent
    miou: float
    mf1: float
    mode: str = "standard"
    class_names: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "miou": self.miou,
            "mf1": self.mf1,
            "per_class": {
                str(c): dict(v) for c, v in sorted(self.per_class.items())
            },
            "class_names": list(self.class_names),
        }

    def format_table(self) -> str:
        lines = []
        header = f"{'Class':<20}{'IoU':>8}{'F1':>8}"
        lines.append(header)
        lines.append("-" * len(header))
        for c in sorted(self.per_class):
            name = (
                self.class_names[c]
                if c < len(self.class_names)
                else f"class_{c}"
            )
            row = self.per_class[c]
            lines.append(f"{name:<20}{row['iou']:>8.1f}{row['f1']:>8.1f}")
        lines.append("-" * len(header))
        lines.append(f"{'Average':<20}{self.miou:>8.1f}{self.mf1:>8.1f}")
        return "\n".join(lines)


def finalize(acc: ConfusionAccumulator, mode: str = "standard",
             class_names: list[str] | None = None) -> EvalReport:
    """IoU = TP/(TP+FP+FN), F1 = 2TP/(2TP+FP+FN), as percentages.

    Zero-denominator classes score 0 and still enter the means.
    """
    per_class = {}
    for c in range(1, acc.n_classes):
        tp, fp, fn = int(acc.tp[c]), int(acc.fp[c]), int(acc.fn[c])
        iou = 100.0 * tp / (tp + fp + fn) if tp + fp + fn else 0.0
        f1 = 100.0 * 2 * tp / (2 * tp + fp + fn) if 2 * tp + fp + fn else 0.0
        per_class[c] = {"iou": iou, "f1": f1}
    ious = [v["iou"] for v in per_class.values()]
    f1s = [v["f1"] for v in per_class.values()]
    return EvalReport(
        per_class=per_class,
        miou=float(np.mean(ious)) if ious else 0.0,
        mf1=float(np.mean(f1s)) if f1s else 0.0,
        mode=mode,
        class_names=list(class_names or []),
    )


def oracle_identification(
    masks: MaskSet, gt_t1: np.ndarray, gt_t2: np.ndarray
) -> SemanticChangeMap:
    """Assign each mask its majority ground-truth class per temporal raster.

    Ties break to the lowest class index; masks whose majority is
    background in both rasters are dropped.  Overlapping kept masks are
    painted in order, later masks winning.
    """
    if gt_t1.shape != gt_t2.shape:
        raise ShapeError("ground-truth rasters must share dimensions")
    t1 = np.zeros_like(np.asarray(gt_t1), dtype=np.int64)
    t2 = np.zeros_like(t1)
    for m in masks:
        if (m.height, m.width) != t1.shape:
            raise ShapeError("mask dimensions do not match the rasters")
        fg = m.to_dense()
        c1 = int(np.bincount(np.asarray(gt_t1)[fg]).argmax())
        c2 = int(np.bincount(np.asarray(gt_t2)[fg]).argmax())
        if c1 == 0 and c2 == 0:
            continue
        t1[fg] = c1
        t2[fg] = c2
    return SemanticChangeMap(t1=t1, t2=t2)


def oracle_change_proposal(
    gt_change,
    features_t1,
    features_t2,
    bank,
    retrieval_config: RetrievalConfig,
    image_h: int,
    image_w: int,
) -> SemanticChangeMap:
    """Use ground-truth change masks as proposals; only identification runs."""
    proposals = []
    for m in gt_change:
        z1, z2, score = score_change(features_t1, features_t2, m, image_h, image_w)
        proposals.append(
            ChangeProposal(mask=m, z1=z1, z2=z2, change_score=score, source="t1")
        )
    assignments = assign_categories(proposals, bank, retrieval_config)
    return rasterize(assignments, proposals, image_h, image_w)
