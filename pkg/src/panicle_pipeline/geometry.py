"""Axis-aligned bounding-box arithmetic: area, IoU, non-maximum suppression.

Boxes are stored as corner pairs ``(x_min, y_min, x_max, y_max)`` in
real-valued pixels.  Interchange formats that use top-left/width/height or
normalized center form are converted to this canonical form at the I/O
boundary, so everything past the parsers deals with a single convention.
All operations here are pure functions on immutable values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import InvalidGeometry, ValidationError


@dataclass(frozen=True, slots=True)
class BoundingBox:
    """Axis-aligned rectangle with strictly positive width and height.

    Degenerate, inverted, or non-finite boxes are rejected at construction;
    they indicate corrupt annotations and must never reach the arithmetic.
    """

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        corners = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in corners):
            raise InvalidGeometry(f"box corners must be numbers, got {corners!r}")
        if not all(math.isfinite(c) for c in corners):
            raise InvalidGeometry(f"box corners must be finite, got {corners!r}")
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise InvalidGeometry(f"box must have positive extent, got {corners!r}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    def translate(self, dx: float, dy: float) -> "BoundingBox":
        return BoundingBox(self.x_min + dx, self.y_min + dy, self.x_max + dx, self.y_max + dy)

    def corners(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)


@dataclass(frozen=True, slots=True)
class ScoredBox:
    """A bounding box with a detector confidence in [0, 1]."""

    box: BoundingBox
    score: float

    def __post_init__(self):
        if isinstance(self.score, bool) or not isinstance(self.score, (int, float)):
            raise ValidationError(f"score must be a number, got {self.score!r}")
        if not 0.0 <= self.score <= 1.0:
            raise ValidationError(f"score out of range [0, 1]: {self.score!r}")

    def translate(self, dx: float, dy: float) -> "ScoredBox":
        return ScoredBox(self.box.translate(dx, dy), self.score)


def intersection_area(a: BoundingBox, b: BoundingBox) -> float:
    """Area of the overlap of two boxes, 0 when their interiors are disjoint."""
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    return iw * ih


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes.

    Symmetric in its arguments, 1.0 for identical boxes, 0.0 when the
    interiors are disjoint.  The union is always positive because degenerate
    boxes cannot be constructed.
    """
    inter = intersection_area(a, b)
    if inter == 0.0:
        return 0.0
    return inter / (a.area + b.area - inter)


def _nms_rank(scored: ScoredBox) -> tuple:
    # Descending score; ties broken by lower x_min, then lower y_min so the
    # output never depends on input order.
    b = scored.box
    return (-scored.score, b.x_min, b.y_min, b.x_max, b.y_max)


def nms(boxes: Sequence[ScoredBox], iou_threshold: float) -> list[ScoredBox]:
    """Greedy non-maximum suppression.

    Walks the boxes in descending score order and keeps each box unless it
    overlaps an already-kept box with IoU strictly greater than
    ``iou_threshold``.  The highest-scoring box of any overlapping cluster is
    therefore always retained, and a threshold of 1.0 suppresses nothing.
    """
    if not 0.0 <= iou_threshold <= 1.0:
        raise ValidationError(f"iou threshold out of range [0, 1]: {iou_threshold!r}")
    kept: list[ScoredBox] = []
    for candidate in sorted(boxes, key=_nms_rank):
        if all(iou(candidate.box, k.box) <= iou_threshold for k in kept):
            kept.append(candidate)
    return kept
