"""Score aggregation, inter-rater reliability, and detection/classification metrics."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import DegenerateVarianceError, ParameterError
from .imaging import BBox
from .records import AnnotationRecord, DetectionRecord, GroundTruthBox, PredictionLabel

__all__ = [
    "GroupStats",
    "aggregate_scores",
    "cronbach_alpha",
    "alpha_from_records",
    "classification_accuracy",
    "iou",
    "match_detections",
    "average_precision",
    "evaluate_detections",
    "mean_ap",
    "MAP_THRESHOLDS",
]

log = logging.getLogger(__name__)

MAP_THRESHOLDS = tuple(round(0.50 + 0.05 * i, 2) for i in range(10))


@dataclass(frozen=True)
class GroupStats:
    group: str
    mean: float
    std: float
    count: int
    single: bool = False  # only one record; std reported as 0 and flagged


def _sample_std(values: Sequence[float], mean: float) -> float:
    n = len(values)
    if n < 2:
        return 0.0
    return math.sqrt(sum((v - mean) ** 2 for v in values) / (n - 1))


def aggregate_scores(
    records: Iterable[AnnotationRecord], group_by: str = "attribute"
) -> list[GroupStats]:
    """Mean and sample standard deviation of scores per group.

    group_by is one of attribute, category, level; records missing the field
    fall into the "(unknown)" group. Output is sorted by group name.
    """
    if group_by not in ("attribute", "category", "level"):
        raise ParameterError(f"group_by must be attribute|category|level, got {group_by!r}")
    groups: dict[str, list[float]] = {}
    for rec in records:
        key = getattr(rec, group_by) or "(unknown)"
        groups.setdefault(key, []).append(float(rec.score))
    out = []
    for name in sorted(groups):
        scores = groups[name]
        mean = sum(scores) / len(scores)
        out.append(
            GroupStats(
                group=name,
                mean=mean,
                std=_sample_std(scores, mean),
                count=len(scores),
                single=len(scores) == 1,
            )
        )
    return out


def cronbach_alpha(matrix: Sequence[Sequence[float]]) -> float:
    """Internal-consistency reliability with raters as the scale components.

    matrix is raters x items and must be complete. alpha =
    k/(k-1) * (1 - sum of per-rater variances / variance of item totals),
    sample variances throughout.
    """
    k = len(matrix)
    if k < 2:
        raise ParameterError(f"need >= 2 raters, got {k}")
    n = len(matrix[0])
    if n < 2:
        raise ParameterError(f"need >= 2 items, got {n}")
    for row in matrix:
        if len(row) != n:
            raise ParameterError("rater rows must all have the same length")

    def var(values: Sequence[float]) -> float:
        mean = sum(values) / len(values)
        return sum((v - mean) ** 2 for v in values) / (len(values) - 1)

    totals = [sum(matrix[r][i] for r in range(k)) for i in range(n)]
    total_var = var(totals)
    if total_var == 0.0:
        raise DegenerateVarianceError("item totals have zero variance; alpha undefined")
    rater_var_sum = sum(var(row) for row in matrix)
    return (k / (k - 1)) * (1.0 - rater_var_sum / total_var)


def alpha_from_records(records: Iterable[AnnotationRecord]) -> float:
    """Cronbach's alpha over exported annotation records.

    Scores are arranged raters x tasks. With rotating rater panels the
    scores of each task are mapped to rater slots ordered by annotator id;
    tasks without the modal panel size are dropped (listwise deletion).
    """
    by_task: dict[str, list[AnnotationRecord]] = {}
    for rec in records:
        by_task.setdefault(rec.task_id, []).append(rec)
    if not by_task:
        raise ParameterError("no records")
    sizes: dict[int, int] = {}
    for recs in by_task.values():
        sizes[len(recs)] = sizes.get(len(recs), 0) + 1
    k = max(sorted(sizes), key=lambda s: sizes[s])
    columns = []
    for task_id in sorted(by_task):
        recs = sorted(by_task[task_id], key=lambda r: r.annotator_id)
        if len(recs) == k:
            columns.append([float(r.score) for r in recs])
    matrix = [[col[r] for col in columns] for r in range(k)]
    return cronbach_alpha(matrix)


def classification_accuracy(labels: Iterable[PredictionLabel]) -> dict[str, float]:
    """Fraction of correct predictions per attribute category."""
    correct: dict[str, int] = {}
    total: dict[str, int] = {}
    for rec in labels:
        total[rec.category] = total.get(rec.category, 0) + 1
        if rec.predicted == rec.actual:
            correct[rec.category] = correct.get(rec.category, 0) + 1
    if not total:
        raise ParameterError("no prediction labels")
    return {c: correct.get(c, 0) / total[c] for c in sorted(total)}


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union of two boxes; disjoint boxes give 0."""
    ix0, iy0 = max(a.x0, b.x0), max(a.y0, b.y0)
    ix1, iy1 = min(a.x1, b.x1), min(a.y1, b.y1)
    if ix0 >= ix1 or iy0 >= iy1:
        return 0.0
    inter = (ix1 - ix0) * (iy1 - iy0)
    return inter / (a.area() + b.area() - inter)


def match_detections(
    dets: Sequence[DetectionRecord],
    gts: Sequence[GroundTruthBox],
    iou_threshold: float,
) -> tuple[list[tuple[DetectionRecord, str]], int]:
    """Greedy TP/FP assignment for one image and class.

    Detections are walked in descending score order (stable, so ties keep
    input order); each claims the unmatched ground-truth box of highest
    IoU at or above the threshold. Returns the flagged detections in that
    order plus the count of unmatched ground truths (false negatives).
    """
    order = sorted(range(len(dets)), key=lambda i: -dets[i].score)
    taken = [False] * len(gts)
    flagged: list[tuple[DetectionRecord, str]] = []
    for i in order:
        best_j, best_iou = -1, 0.0
        for j, gt in enumerate(gts):
            if taken[j]:
                continue
            v = iou(dets[i].box, gt.box)
            if v >= iou_threshold and v > best_iou:
                best_j, best_iou = j, v
        if best_j >= 0:
            taken[best_j] = True
            flagged.append((dets[i], "TP"))
        else:
            flagged.append((dets[i], "FP"))
    return flagged, taken.count(False)


def average_precision(flags: Sequence[str], gt_count: int) -> float:
    """Area under the monotone precision envelope, all-points integration.

    flags is the TP/FP outcome sequence in descending score order across
    the whole dataset for one class.
    """
    if gt_count < 0:
        raise ParameterError(f"gt_count must be >= 0, got {gt_count}")
    if gt_count == 0:
        if flags:
            log.warning("average_precision: detections but no ground truth; AP := 0")
        return 0.0
    if not flags:
        return 0.0
    precisions, recalls = [], []
    tp = fp = 0
    for f in flags:
        if f == "TP":
            tp += 1
        else:
            fp += 1
        precisions.append(tp / (tp + fp))
        recalls.append(tp / gt_count)
    # monotone envelope: precision at recall r is the max precision at >= r
    envelope = precisions[:]
    for i in range(len(envelope) - 2, -1, -1):
        envelope[i] = max(envelope[i], envelope[i + 1])
    ap = 0.0
    prev_recall = 0.0
    for rec, env in zip(recalls, envelope):
        if rec > prev_recall:
            ap += (rec - prev_recall) * env
            prev_recall = rec
    return ap


def _class_flags(
    dets: Sequence[DetectionRecord],
    gts: Sequence[GroundTruthBox],
    threshold: float,
) -> list[str]:
    """Dataset-wide TP/FP sequence for one class in global score order."""
    dets_sorted = sorted(dets, key=lambda d: -d.score)
    gts_by_image: dict[str, list[GroundTruthBox]] = {}
    for gt in gts:
        gts_by_image.setdefault(gt.image_id, []).append(gt)
    taken: dict[str, list[bool]] = {k: [False] * len(v) for k, v in gts_by_image.items()}
    flags = []
    for det in dets_sorted:
        candidates = gts_by_image.get(det.image_id, [])
        used = taken.get(det.image_id, [])
        best_j, best_iou = -1, 0.0
        for j, gt in enumerate(candidates):
            if used[j]:
                continue
            v = iou(det.box, gt.box)
            if v >= threshold and v > best_iou:
                best_j, best_iou = j, v
        if best_j >= 0:
            used[best_j] = True
            flags.append("TP")
        else:
            flags.append("FP")
    return flags


def evaluate_detections(
    dets: Sequence[DetectionRecord],
    gts: Sequence[GroundTruthBox],
    threshold: float,
) -> dict[str, float]:
    """Per-class AP at one IoU threshold, for classes with at least one GT."""
    classes = sorted({gt.label for gt in gts})
    out = {}
    for cls in classes:
        cls_dets = [d for d in dets if d.label == cls]
        cls_gts = [g for g in gts if g.label == cls]
        flags = _class_flags(cls_dets, cls_gts, threshold)
        out[cls] = average_precision(flags, len(cls_gts))
    return out


def mean_ap(
    dets: Sequence[DetectionRecord],
    gts: Sequence[GroundTruthBox],
    thresholds: Sequence[float] = MAP_THRESHOLDS,
) -> dict[str, float]:
    """mAP@0.5 and the threshold-averaged mAP over 0.50..0.95."""
    if not gts:
        raise ParameterError("no ground truth boxes")
    per_threshold = []
    for t in thresholds:
        aps = evaluate_detections(dets, gts, t)
        per_threshold.append(sum(aps.values()) / len(aps))
    ap50 = evaluate_detections(dets, gts, 0.5)
    return {
        "mAP@0.5": sum(ap50.values()) / len(ap50),
        "mAP@[.5:.95]": sum(per_threshold) / len(per_threshold),
    }
