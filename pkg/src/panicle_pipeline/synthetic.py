"""Deterministic synthetic multi-date detection scenarios with known truth.

The generator simulates a plot of plants whose panicles emerge on a logistic
schedule: plant ``i`` of ``n`` emerges at the logistic quantile
``midpoint + ln(q/(1-q)) / rate`` with ``q = (i + 0.5) / n``.  Using the
stratified quantiles instead of independent draws makes the realized
emergence curve track the schedule tightly and keeps generation fully
deterministic for a given seed.  The scenario's true flowering day is the
schedule's median, ``emergence_midpoint``: the day the modeled emerged
fraction reaches one half.

Each flight date yields one image covering the whole plot.  Ground truth
contains one box per emerged plant; detections are the ground truth
perturbed by positional jitter, dropped at ``miss_rate``, duplicated at
``duplicate_rate``, and scored ``1 - |noise|``.  All randomness flows from a
single :class:`random.Random` (MT19937) instance seeded with ``spec.seed``;
draws happen in a fixed documented order (per plant: width, height, center x,
center y; then per date and plant: miss, jitter x/y, score noise, duplicate,
and the duplicate's jitter/score), so identical specs produce bit-identical
scenarios.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from pathlib import Path

from .datasets import (
    CountSeries,
    DetectionSet,
    GroundTruthSet,
    ImageRecord,
    serialize_coco_detections,
    serialize_coco_ground_truth,
    serialize_count_series,
)
from .errors import InvalidSpec
from .geometry import BoundingBox, ScoredBox

_MIN_BOX_SIZE = 4.0


@dataclass(frozen=True)
class ScenarioSpec:
    """Parameters of a synthetic multi-date scenario."""

    n_plants: int = 120
    field_width: int = 800
    field_height: int = 600
    emergence_midpoint: float = 70.0
    emergence_rate: float = 0.4
    dates: tuple[int, ...] = (65, 68, 70, 76, 79, 83)
    box_size_mean: float = 28.0
    box_size_sd: float = 4.0
    jitter_sd: float = 2.0
    duplicate_rate: float = 0.05
    miss_rate: float = 0.05
    score_noise_sd: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not isinstance(self.n_plants, int) or self.n_plants < 0:
            raise InvalidSpec(f"n_plants must be a non-negative integer, got {self.n_plants!r}")
        for name in ("field_width", "field_height"):
            value = getattr(self, name)
            if not isinstance(value, int) or value <= 0:
                raise InvalidSpec(f"{name} must be a positive integer, got {value!r}")
        if self.emergence_rate <= 0:
            raise InvalidSpec(f"emergence_rate must be positive, got {self.emergence_rate!r}")
        if not self.dates:
            raise InvalidSpec("need at least one flight date")
        previous = None
        for day in self.dates:
            if not isinstance(day, int) or day < 0:
                raise InvalidSpec(f"dates must be non-negative integers, got {day!r}")
            if previous is not None and day <= previous:
                raise InvalidSpec("dates must be strictly increasing")
            previous = day
        if self.box_size_mean < _MIN_BOX_SIZE:
            raise InvalidSpec(f"box_size_mean must be >= {_MIN_BOX_SIZE}, got {self.box_size_mean!r}")
        if self.box_size_mean > min(self.field_width, self.field_height) / 2:
            raise InvalidSpec("box_size_mean too large for the field")
        for name in ("box_size_sd", "jitter_sd", "score_noise_sd"):
            if getattr(self, name) < 0:
                raise InvalidSpec(f"{name} must be non-negative")
        for name in ("duplicate_rate", "miss_rate"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise InvalidSpec(f"{name} must be in [0, 1], got {value!r}")


@dataclass(frozen=True)
class SyntheticScenario:
    """Generated scenario plus the ground truth it was generated from."""

    spec: ScenarioSpec
    ground_truth: dict[int, GroundTruthSet]
    detections: dict[int, DetectionSet]
    true_series: CountSeries
    true_flowering_day: float

    def combined_ground_truth(self) -> GroundTruthSet:
        """All dates in one set, one image per date."""
        images = []
        boxes = {}
        for day in sorted(self.ground_truth):
            gt = self.ground_truth[day]
            images.extend(gt.images)
            boxes.update(gt.boxes)
        return GroundTruthSet(images=tuple(images), boxes=boxes)

    def combined_detections(self) -> DetectionSet:
        images = []
        detections = {}
        for day in sorted(self.detections):
            det = self.detections[day]
            images.extend(det.images)
            detections.update(det.detections)
        return DetectionSet(images=tuple(images), detections=detections)


def _image_id(day: int) -> str:
    return f"day{day:03d}"


def generate(spec: ScenarioSpec) -> SyntheticScenario:
    """Generate one deterministic scenario from its spec."""
    rng = random.Random(spec.seed)
    scale = 1.0 / spec.emergence_rate

    emergence_days = [
        spec.emergence_midpoint + scale * math.log(q / (1.0 - q))
        for q in ((i + 0.5) / spec.n_plants for i in range(spec.n_plants))
    ]

    max_size = min(spec.field_width, spec.field_height) / 2.0
    plant_boxes: list[BoundingBox] = []
    for _ in range(spec.n_plants):
        w = min(max(rng.gauss(spec.box_size_mean, spec.box_size_sd), _MIN_BOX_SIZE), max_size)
        h = min(max(rng.gauss(spec.box_size_mean, spec.box_size_sd), _MIN_BOX_SIZE), max_size)
        cx = rng.uniform(w / 2 + 1.0, spec.field_width - w / 2 - 1.0)
        cy = rng.uniform(h / 2 + 1.0, spec.field_height - h / 2 - 1.0)
        plant_boxes.append(BoundingBox(cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2))

    ground_truth: dict[int, GroundTruthSet] = {}
    detections: dict[int, DetectionSet] = {}
    observations = []
    for day in spec.dates:
        record = ImageRecord(
            image_id=_image_id(day),
            file_name=f"{_image_id(day)}.png",
            width=spec.field_width,
            height=spec.field_height,
            days_after_planting=day,
        )
        gt_boxes = []
        det_boxes = []
        for plant, emerged_on in enumerate(emergence_days):
            if emerged_on > day:
                continue
            box = plant_boxes[plant]
            gt_boxes.append(box)
            if rng.random() < spec.miss_rate:
                continue
            det_boxes.append(_observe(rng, box, spec))
            if rng.random() < spec.duplicate_rate:
                det_boxes.append(_observe(rng, box, spec))
        ground_truth[day] = GroundTruthSet(images=(record,), boxes={record.image_id: tuple(gt_boxes)})
        detections[day] = DetectionSet(images=(record,), detections={record.image_id: tuple(det_boxes)})
        observations.append((day, len(gt_boxes)))

    return SyntheticScenario(
        spec=spec,
        ground_truth=ground_truth,
        detections=detections,
        true_series=CountSeries(tuple(observations)),
        true_flowering_day=spec.emergence_midpoint,
    )


def _observe(rng: random.Random, box: BoundingBox, spec: ScenarioSpec) -> ScoredBox:
    dx = rng.gauss(0.0, spec.jitter_sd)
    dy = rng.gauss(0.0, spec.jitter_sd)
    score = min(1.0, max(0.0, 1.0 - abs(rng.gauss(0.0, spec.score_noise_sd))))
    return ScoredBox(box.translate(dx, dy), score)


def write_scenario(scenario: SyntheticScenario, out_dir: str | Path) -> dict[str, Path]:
    """Write the scenario as the same interchange files real data uses."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "ground_truth": out_dir / "ground_truth.json",
        "detections": out_dir / "detections.json",
        "counts": out_dir / "counts.csv",
        "truth": out_dir / "truth.json",
    }
    paths["ground_truth"].write_text(
        serialize_coco_ground_truth(scenario.combined_ground_truth()), encoding="utf-8"
    )
    paths["detections"].write_text(
        serialize_coco_detections(scenario.combined_detections()), encoding="utf-8"
    )
    paths["counts"].write_text(serialize_count_series(scenario.true_series), encoding="utf-8")
    paths["truth"].write_text(
        json.dumps(
            {
                "true_flowering_day": scenario.true_flowering_day,
                "true_counts": list(scenario.true_series.observations),
                "seed": scenario.spec.seed,
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
    return paths
