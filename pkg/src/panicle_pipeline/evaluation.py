"""Detection evaluation: greedy IoU matching, AP, and count-error metrics.

Matching follows the ranked convention: detections are processed in
descending score order and each one claims the unmatched ground-truth box
with the highest IoU in its image, provided that IoU reaches the threshold.
Precision/recall accumulate over that ranking, and average precision is the
plain sum ``AP = sum_k (R_k - R_{k-1}) * P_k`` by default; a monotone
right-max interpolated variant is available behind a flag for comparison
with common detection toolkits.

Counting accuracy is summarized by MAPE (a fraction, not a percentage),
MAE, and RMSE over per-image (ground truth, predicted) count pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .datasets import DetectionSet, GroundTruthSet
from .errors import (
    EmptyGroundTruth,
    ImageMismatch,
    ValidationError,
    ZeroGroundTruthCount,
)
from .geometry import iou

DEFAULT_IOU_THRESHOLD = 0.5
DEFAULT_COUNT_SCORE_FLOOR = 0.25


@dataclass(frozen=True)
class DetectionOutcome:
    """One ranked detection, flagged true positive or false positive."""

    image_id: str
    score: float
    true_positive: bool


@dataclass(frozen=True)
class MatchReport:
    """Ranked match flags plus per-image false-negative counts.

    ``outcomes`` is ordered by descending score across all images, the same
    ranking the precision/recall curve accumulates over.
    """

    outcomes: tuple[DetectionOutcome, ...]
    false_negatives: dict[str, int] = field(default_factory=dict)

    @property
    def tp(self) -> int:
        return sum(1 for o in self.outcomes if o.true_positive)

    @property
    def fp(self) -> int:
        return sum(1 for o in self.outcomes if not o.true_positive)

    @property
    def fn(self) -> int:
        return sum(self.false_negatives.values())


@dataclass(frozen=True)
class PRCurve:
    """Points (recall_k, precision_k) at each detection rank k."""

    points: tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class CountErrors:
    """MAPE/MAE/RMSE over per-image count errors e_i = predicted_i - truth_i."""

    mape: float
    mae: float
    rmse: float
    n: int
    errors: tuple[float, ...]


def match(
    gt: GroundTruthSet,
    det: DetectionSet,
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
    score_floor: float = 0.0,
) -> MatchReport:
    """Greedily match detections to ground truth at the given IoU threshold.

    Detections below ``score_floor`` are ignored.  Ties in score are broken
    by lower x_min, then image_id, so the ranking (and therefore the report)
    never depends on input order.  Each ground-truth box is matched at most
    once; leftovers count as false negatives.
    """
    if not 0.0 <= iou_threshold <= 1.0:
        raise ValidationError(f"iou threshold out of range [0, 1]: {iou_threshold!r}")
    gt_ids = set(gt.image_ids())
    for image_id in det.image_ids():
        if image_id not in gt_ids:
            raise ImageMismatch(f"detections reference image {image_id!r} absent from ground truth")
    for image_id in det.detections:
        if image_id not in gt_ids:
            raise ImageMismatch(f"detections reference image {image_id!r} absent from ground truth")

    ranked = []
    for image_id in det.image_ids():
        for scored in det.detections_for(image_id):
            if scored.score >= score_floor:
                ranked.append((image_id, scored))
    ranked.sort(key=lambda item: (-item[1].score, item[1].box.x_min, item[0], item[1].box.y_min))

    unmatched = {image_id: list(gt.boxes_for(image_id)) for image_id in gt.image_ids()}
    outcomes = []
    for image_id, scored in ranked:
        candidates = unmatched[image_id]
        best_index = -1
        best_key = None
        for index, gt_box in enumerate(candidates):
            overlap = iou(scored.box, gt_box)
            key = (overlap, -gt_box.x_min, -gt_box.y_min)
            if best_key is None or key > best_key:
                best_key = key
                best_index = index
        hit = best_key is not None and best_key[0] >= iou_threshold
        if hit:
            candidates.pop(best_index)
        outcomes.append(DetectionOutcome(image_id, scored.score, hit))

    false_negatives = {image_id: len(boxes) for image_id, boxes in unmatched.items()}
    return MatchReport(outcomes=tuple(outcomes), false_negatives=false_negatives)


def pr_curve(report: MatchReport, total_gt: int) -> PRCurve:
    """Cumulative precision/recall over the ranked detections."""
    if total_gt < 1:
        raise EmptyGroundTruth("precision/recall needs at least one ground-truth box")
    points = []
    cumulative_tp = 0
    for rank, outcome in enumerate(report.outcomes, start=1):
        if outcome.true_positive:
            cumulative_tp += 1
        points.append((cumulative_tp / total_gt, cumulative_tp / rank))
    return PRCurve(points=tuple(points))


def average_precision(curve: PRCurve, interpolated: bool = False) -> float:
    """Area-style summary of the ranked precision/recall sequence.

    With ``interpolated=True`` precision is first replaced by its running
    right-max (monotone non-increasing), the convention most detection
    toolkits apply before summing.
    """
    if not curve.points:
        return 0.0
    precisions = [p for _, p in curve.points]
    if interpolated:
        for i in range(len(precisions) - 2, -1, -1):
            precisions[i] = max(precisions[i], precisions[i + 1])
    terms = []
    previous_recall = 0.0
    for (recall, _), precision in zip(curve.points, precisions):
        terms.append((recall - previous_recall) * precision)
        previous_recall = recall
    return math.fsum(terms)


def count_errors(pairs: Sequence[tuple[int, int]]) -> CountErrors:
    """MAPE, MAE, and RMSE over (ground truth count, predicted count) pairs.

    A ground-truth count of zero makes the percentage error undefined and is
    reported as an error, never silently skipped.
    """
    if not pairs:
        raise ValidationError("count metrics need at least one sample")
    errors = []
    ratio_terms = []
    for index, (truth, predicted) in enumerate(pairs):
        if truth < 1:
            raise ZeroGroundTruthCount(
                f"sample {index}: ground-truth count must be >= 1 for MAPE, got {truth!r}"
            )
        e = predicted - truth
        errors.append(float(e))
        ratio_terms.append(abs(e) / truth)
    n = len(pairs)
    mape = math.fsum(ratio_terms) / n
    mae = math.fsum(abs(e) for e in errors) / n
    rmse = math.sqrt(math.fsum(e * e for e in errors) / n)
    return CountErrors(mape=mape, mae=mae, rmse=rmse, n=n, errors=tuple(errors))


def count_detections(
    det: DetectionSet,
    score_floor: float = DEFAULT_COUNT_SCORE_FLOOR,
    min_area: float = 0.0,
) -> dict[str, int]:
    """Per-image detection counts at a fixed operating point.

    Only detections with ``score >= score_floor`` and ``area >= min_area``
    are counted; the size filter drops pre-bloom panicles that small boxes
    betray on early flight dates.
    """
    if score_floor < 0 or min_area < 0:
        raise ValidationError("score_floor and min_area must be non-negative")
    counts = {}
    for image_id in det.image_ids():
        counts[image_id] = sum(
            1
            for scored in det.detections_for(image_id)
            if scored.score >= score_floor and scored.box.area >= min_area
        )
    return counts


@dataclass(frozen=True)
class EvaluationReport:
    """Full evaluation of a detection set against ground truth."""

    ap: float
    counts: CountErrors
    matching: MatchReport
    config: dict

    def to_dict(self) -> dict:
        return {
            "ap": self.ap,
            "mape": self.counts.mape,
            "mae": self.counts.mae,
            "rmse": self.counts.rmse,
            "n_images": self.counts.n,
            "true_positives": self.matching.tp,
            "false_positives": self.matching.fp,
            "false_negatives": self.matching.fn,
            "config": dict(self.config),
        }

    def table(self) -> str:
        rows = [
            ("AP", self.ap),
            ("MAPE", self.counts.mape),
            ("MAE", self.counts.mae),
            ("RMSE", self.counts.rmse),
        ]
        width = max(len(name) for name, _ in rows)
        lines = [f"{'Metric'.ljust(width)}  Value"]
        lines += [f"{name.ljust(width)}  {value:.6f}" for name, value in rows]
        return "\n".join(lines) + "\n"


def evaluate_detections(
    gt: GroundTruthSet,
    det: DetectionSet,
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
    count_score_floor: float = DEFAULT_COUNT_SCORE_FLOOR,
    min_area: float = 0.0,
    interpolated_ap: bool = False,
) -> EvaluationReport:
    """Run the whole evaluation: AP over the full ranking plus count metrics.

    AP always sweeps every detection (score floor 0); the count metrics use
    the fixed ``count_score_floor``/``min_area`` operating point.  Every
    threshold is echoed into the report for provenance.
    """
    report = match(gt, det, iou_threshold=iou_threshold, score_floor=0.0)
    total_gt = gt.total_boxes
    curve = pr_curve(report, total_gt)
    ap = average_precision(curve, interpolated=interpolated_ap)

    per_image = count_detections(det, score_floor=count_score_floor, min_area=min_area)
    pairs = [
        (len(gt.boxes_for(image_id)), per_image.get(image_id, 0)) for image_id in gt.image_ids()
    ]
    counts = count_errors(pairs)

    config = {
        "iou_threshold": iou_threshold,
        "ap_score_floor": 0.0,
        "count_score_floor": count_score_floor,
        "min_area": min_area,
        "interpolated_ap": interpolated_ap,
    }
    return EvaluationReport(ap=ap, counts=counts, matching=report, config=config)
