"""Dataset containers and interchange-format I/O.

Two interchange formats are supported, because upstream detectors emit one
or the other:

* ``coco-like-json`` -- a single UTF-8 JSON document::

      {"images": [{"id": str, "file_name": str, "width": int, "height": int,
                   "days_after_planting": int?}, ...],
       "annotations": [{"image_id": str, "bbox": [x, y, w, h], "score": num?}, ...]}

  ``bbox`` is top-left x/y plus width/height in real-valued pixels.

* ``yolo-txt-dir`` -- a directory of ``<image_id>.txt`` files, one line per
  box: ``class cx cy w h`` for ground truth or ``class cx cy w h score`` for
  detections, with cx/cy/w/h normalized to [0, 1].  A sidecar ``images.csv``
  provides ``image_id,file_name,width,height,days_after_planting``.  An image
  with no txt file has zero boxes.

Count series travel as a CSV with header ``days_after_planting,count``.

Parsing is strict: syntactically broken documents raise ``ParseError``,
well-formed documents that violate an invariant raise ``ValidationError``.
Nothing is clamped or silently dropped.  Serializers emit a canonical form
(sorted records, LF endings) so serialize-parse round trips are stable.
"""

from __future__ import annotations

import csv
import io
import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .errors import InvalidRatio, ParseError, ValidationError
from .geometry import BoundingBox, ScoredBox

FORMAT_COCO = "coco-like-json"
FORMAT_YOLO = "yolo-txt-dir"
FORMATS = (FORMAT_COCO, FORMAT_YOLO)

_IMAGES_CSV = "images.csv"
_IMAGES_CSV_HEADER = ["image_id", "file_name", "width", "height", "days_after_planting"]
_COUNTS_HEADER = "days_after_planting,count"


@dataclass(frozen=True)
class ImageRecord:
    """One image of the dataset; the pipeline never opens the pixel file."""

    image_id: str
    file_name: str
    width: int
    height: int
    days_after_planting: int | None = None

    def __post_init__(self):
        if not isinstance(self.image_id, str) or not self.image_id:
            raise ValidationError(f"image_id must be a non-empty string, got {self.image_id!r}")
        if not isinstance(self.file_name, str):
            raise ValidationError(f"file_name must be a string, got {self.file_name!r}")
        for name in ("width", "height"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value <= 0:
                raise ValidationError(f"image {self.image_id!r}: {name} must be a positive integer, got {value!r}")
        dap = self.days_after_planting
        if dap is not None and (isinstance(dap, bool) or not isinstance(dap, int) or dap < 0):
            raise ValidationError(
                f"image {self.image_id!r}: days_after_planting must be a non-negative integer, got {dap!r}"
            )


def _check_images(images: tuple[ImageRecord, ...]) -> dict[str, ImageRecord]:
    by_id: dict[str, ImageRecord] = {}
    for record in images:
        if record.image_id in by_id:
            raise ValidationError(f"duplicate image_id {record.image_id!r}")
        by_id[record.image_id] = record
    return by_id


@dataclass(frozen=True)
class GroundTruthSet:
    """Per-image ground-truth boxes; every box must lie within its image."""

    images: tuple[ImageRecord, ...]
    boxes: dict[str, tuple[BoundingBox, ...]] = field(default_factory=dict)

    def __post_init__(self):
        by_id = _check_images(self.images)
        for image_id, boxes in self.boxes.items():
            record = by_id.get(image_id)
            if record is None:
                raise ValidationError(f"boxes reference unknown image_id {image_id!r}")
            for box in boxes:
                if box.x_min < 0 or box.y_min < 0 or box.x_max > record.width or box.y_max > record.height:
                    raise ValidationError(
                        f"image {image_id!r}: box {box.corners()} exceeds image bounds "
                        f"{record.width}x{record.height}"
                    )

    def image_ids(self) -> list[str]:
        return [record.image_id for record in self.images]

    def boxes_for(self, image_id: str) -> tuple[BoundingBox, ...]:
        return self.boxes.get(image_id, ())

    @property
    def total_boxes(self) -> int:
        return sum(len(b) for b in self.boxes.values())


@dataclass(frozen=True)
class DetectionSet:
    """Per-image scored detections.

    Detector output may legitimately stick out past the image border, so
    unlike ground truth only the image reference is validated, not bounds.
    """

    images: tuple[ImageRecord, ...]
    detections: dict[str, tuple[ScoredBox, ...]] = field(default_factory=dict)

    def __post_init__(self):
        by_id = _check_images(self.images)
        for image_id in self.detections:
            if image_id not in by_id:
                raise ValidationError(f"detections reference unknown image_id {image_id!r}")

    def image_ids(self) -> list[str]:
        return [record.image_id for record in self.images]

    def detections_for(self, image_id: str) -> tuple[ScoredBox, ...]:
        return self.detections.get(image_id, ())

    @property
    def total_detections(self) -> int:
        return sum(len(b) for b in self.detections.values())


@dataclass(frozen=True)
class CountSeries:
    """Ordered (days_after_planting, count) observations across flight dates."""

    observations: tuple[tuple[int, int], ...]

    def __post_init__(self):
        previous_day = None
        for day, count in self.observations:
            for name, value in (("day", day), ("count", count)):
                if isinstance(value, bool) or not isinstance(value, int) or value < 0:
                    raise ValidationError(f"{name} must be a non-negative integer, got {value!r}")
            if previous_day is not None and day <= previous_day:
                raise ValidationError(f"days must be strictly increasing, got {previous_day} then {day}")
            previous_day = day

    @property
    def days(self) -> tuple[int, ...]:
        return tuple(day for day, _ in self.observations)

    @property
    def counts(self) -> tuple[int, ...]:
        return tuple(count for _, count in self.observations)

    def __len__(self) -> int:
        return len(self.observations)


# ---------------------------------------------------------------------------
# coco-like-json


def _decode_text(data: bytes | str, source: str | None) -> str:
    if isinstance(data, str):
        return data
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"document is not valid UTF-8: {exc}", source=source) from exc


def _load_coco(data: bytes | str, source: str | None) -> tuple[tuple[ImageRecord, ...], list]:
    text = _decode_text(data, source)
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg} (offset {exc.pos})", source=source, line=exc.lineno) from exc
    if not isinstance(document, dict):
        raise ValidationError("top level must be a JSON object with 'images' and 'annotations'")
    for key in ("images", "annotations"):
        if not isinstance(document.get(key), list):
            raise ValidationError(f"missing or non-list {key!r} entry")

    records = []
    for index, entry in enumerate(document["images"]):
        if not isinstance(entry, dict):
            raise ValidationError(f"images[{index}] must be an object")
        try:
            records.append(
                ImageRecord(
                    image_id=entry.get("id"),
                    file_name=entry.get("file_name"),
                    width=entry.get("width"),
                    height=entry.get("height"),
                    days_after_planting=entry.get("days_after_planting"),
                )
            )
        except ValidationError as exc:
            raise ValidationError(f"images[{index}]: {exc}") from exc
    return tuple(records), document["annotations"]


def _annotation_box(entry: dict, index: int) -> tuple[str, BoundingBox]:
    if not isinstance(entry, dict):
        raise ValidationError(f"annotations[{index}] must be an object")
    image_id = entry.get("image_id")
    if not isinstance(image_id, str):
        raise ValidationError(f"annotations[{index}]: image_id must be a string, got {image_id!r}")
    bbox = entry.get("bbox")
    if not isinstance(bbox, list) or len(bbox) != 4:
        raise ValidationError(f"annotations[{index}] (image {image_id!r}): bbox must be a list of four numbers")
    for value in bbox:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ValidationError(f"annotations[{index}] (image {image_id!r}): bbox has non-numeric entry {value!r}")
    x, y, w, h = (float(v) for v in bbox)
    if w <= 0 or h <= 0:
        raise ValidationError(f"annotations[{index}] (image {image_id!r}): bbox width/height must be positive")
    return image_id, BoundingBox(x, y, x + w, y + h)


def parse_coco_ground_truth(data: bytes | str, source: str | None = None) -> GroundTruthSet:
    """Parse ground-truth annotations from a coco-like JSON document."""
    records, annotations = _load_coco(data, source)
    boxes: dict[str, list[BoundingBox]] = {}
    for index, entry in enumerate(annotations):
        image_id, box = _annotation_box(entry, index)
        boxes.setdefault(image_id, []).append(box)
    return GroundTruthSet(images=records, boxes={k: tuple(v) for k, v in boxes.items()})


def parse_coco_detections(data: bytes | str, source: str | None = None) -> DetectionSet:
    """Parse scored detections from a coco-like JSON document."""
    records, annotations = _load_coco(data, source)
    detections: dict[str, list[ScoredBox]] = {}
    for index, entry in enumerate(annotations):
        image_id, box = _annotation_box(entry, index)
        if "score" not in entry:
            raise ValidationError(f"annotations[{index}] (image {image_id!r}): missing required score")
        score = entry["score"]
        if isinstance(score, bool) or not isinstance(score, (int, float)) or not math.isfinite(score):
            raise ValidationError(f"annotations[{index}] (image {image_id!r}): score must be a number, got {score!r}")
        if not 0.0 <= score <= 1.0:
            raise ValidationError(f"annotations[{index}] (image {image_id!r}): score out of range [0, 1]: {score!r}")
        detections.setdefault(image_id, []).append(ScoredBox(box, float(score)))
    return DetectionSet(images=records, detections={k: tuple(v) for k, v in detections.items()})


def _image_entry(record: ImageRecord) -> dict:
    entry = {
        "id": record.image_id,
        "file_name": record.file_name,
        "width": record.width,
        "height": record.height,
    }
    if record.days_after_planting is not None:
        entry["days_after_planting"] = record.days_after_planting
    return entry


def _dump_coco(images: list[dict], annotations: list[dict]) -> str:
    document = {"images": images, "annotations": annotations}
    return json.dumps(document, indent=2, sort_keys=True) + "\n"


def serialize_coco_ground_truth(gt: GroundTruthSet) -> str:
    """Canonical coco-like JSON for a ground-truth set (sorted, LF-terminated)."""
    images = [_image_entry(r) for r in sorted(gt.images, key=lambda r: r.image_id)]
    annotations = []
    for image_id in sorted(gt.boxes):
        for box in sorted(gt.boxes[image_id], key=lambda b: b.corners()):
            annotations.append(
                {"image_id": image_id, "bbox": [box.x_min, box.y_min, box.width, box.height]}
            )
    return _dump_coco(images, annotations)


def serialize_coco_detections(det: DetectionSet) -> str:
    """Canonical coco-like JSON for a detection set (sorted, LF-terminated)."""
    images = [_image_entry(r) for r in sorted(det.images, key=lambda r: r.image_id)]
    annotations = []
    for image_id in sorted(det.detections):
        ordered = sorted(det.detections[image_id], key=lambda s: (s.box.corners(), s.score))
        for scored in ordered:
            box = scored.box
            annotations.append(
                {
                    "image_id": image_id,
                    "bbox": [box.x_min, box.y_min, box.width, box.height],
                    "score": scored.score,
                }
            )
    return _dump_coco(images, annotations)


# ---------------------------------------------------------------------------
# yolo-txt-dir


def _parse_images_csv(path: Path) -> tuple[ImageRecord, ...]:
    if not path.is_file():
        raise ParseError(f"missing sidecar {_IMAGES_CSV}", source=str(path))
    text = _decode_text(path.read_bytes(), str(path))
    try:
        rows = list(csv.reader(io.StringIO(text)))
    except csv.Error as exc:
        raise ParseError(f"broken CSV: {exc}", source=str(path)) from exc
    if not rows or rows[0] != _IMAGES_CSV_HEADER:
        raise ParseError(
            f"first line must be {','.join(_IMAGES_CSV_HEADER)!r}", source=str(path), line=1
        )
    records = []
    for line_no, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 5:
            raise ParseError(f"expected 5 fields, got {len(row)}", source=str(path), line=line_no)
        image_id, file_name, width, height, dap = row
        try:
            width_i, height_i = int(width), int(height)
            dap_i = int(dap) if dap != "" else None
        except ValueError as exc:
            raise ParseError(f"non-integer field: {exc}", source=str(path), line=line_no) from exc
        records.append(ImageRecord(image_id, file_name, width_i, height_i, dap_i))
    return tuple(records)


def _parse_yolo_line(
    tokens: list[str], record: ImageRecord, with_score: bool, source: str, line_no: int
) -> tuple[BoundingBox, float | None]:
    expected = 6 if with_score else 5
    if len(tokens) != expected:
        raise ParseError(f"expected {expected} fields, got {len(tokens)}", source=source, line=line_no)
    try:
        int(tokens[0])
        values = [float(t) for t in tokens[1:]]
    except ValueError as exc:
        raise ParseError(f"non-numeric field: {exc}", source=source, line=line_no) from exc
    if not all(math.isfinite(v) for v in values):
        raise ParseError("non-finite field", source=source, line=line_no)
    cx, cy, w, h = values[:4]
    for name, value in (("cx", cx), ("cy", cy), ("w", w), ("h", h)):
        if not 0.0 <= value <= 1.0:
            raise ValidationError(f"{source}:{line_no}: {name} must be normalized to [0, 1], got {value!r}")
    if w <= 0 or h <= 0:
        raise ValidationError(f"{source}:{line_no}: width/height must be positive")
    box = BoundingBox(
        (cx - w / 2) * record.width,
        (cy - h / 2) * record.height,
        (cx + w / 2) * record.width,
        (cy + h / 2) * record.height,
    )
    score = None
    if with_score:
        score = values[4]
        if not 0.0 <= score <= 1.0:
            raise ValidationError(f"{source}:{line_no}: score out of range [0, 1]: {score!r}")
    return box, score


def _read_yolo_dir(directory: str | Path, with_score: bool):
    directory = Path(directory)
    if not directory.is_dir():
        raise ParseError(f"not a directory: {directory}", source=str(directory))
    records = _parse_images_csv(directory / _IMAGES_CSV)
    known = {r.image_id for r in records}
    for txt in directory.glob("*.txt"):
        if txt.stem not in known:
            raise ValidationError(f"{txt}: label file references unknown image_id {txt.stem!r}")
    per_image: dict[str, list] = {}
    for record in records:
        txt = directory / f"{record.image_id}.txt"
        if not txt.is_file():
            continue  # no label file means zero boxes
        text = _decode_text(txt.read_bytes(), str(txt))
        for line_no, line in enumerate(text.splitlines(), start=1):
            tokens = line.split()
            if not tokens:
                continue
            box, score = _parse_yolo_line(tokens, record, with_score, str(txt), line_no)
            per_image.setdefault(record.image_id, []).append((box, score))
    return records, per_image


def read_yolo_ground_truth(directory: str | Path) -> GroundTruthSet:
    """Load ground truth from a yolo-txt directory with its images.csv sidecar."""
    records, per_image = _read_yolo_dir(directory, with_score=False)
    return GroundTruthSet(
        images=records,
        boxes={k: tuple(box for box, _ in v) for k, v in per_image.items()},
    )


def read_yolo_detections(directory: str | Path) -> DetectionSet:
    """Load detections from a yolo-txt directory with its images.csv sidecar."""
    records, per_image = _read_yolo_dir(directory, with_score=True)
    return DetectionSet(
        images=records,
        detections={k: tuple(ScoredBox(box, score) for box, score in v) for k, v in per_image.items()},
    )


def _images_csv_text(images: Iterable[ImageRecord]) -> str:
    lines = [",".join(_IMAGES_CSV_HEADER)]
    for record in sorted(images, key=lambda r: r.image_id):
        dap = "" if record.days_after_planting is None else str(record.days_after_planting)
        lines.append(f"{record.image_id},{record.file_name},{record.width},{record.height},{dap}")
    return "\n".join(lines) + "\n"


def _yolo_fields(box: BoundingBox, record: ImageRecord) -> tuple[float, float, float, float]:
    cx = (box.x_min + box.x_max) / 2 / record.width
    cy = (box.y_min + box.y_max) / 2 / record.height
    return cx, cy, box.width / record.width, box.height / record.height


def write_yolo_ground_truth(gt: GroundTruthSet, directory: str | Path) -> None:
    """Write a ground-truth set as a yolo-txt directory (one txt per image)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / _IMAGES_CSV).write_text(_images_csv_text(gt.images), encoding="utf-8")
    for record in gt.images:
        lines = []
        for box in sorted(gt.boxes_for(record.image_id), key=lambda b: b.corners()):
            cx, cy, w, h = _yolo_fields(box, record)
            lines.append(f"0 {cx!r} {cy!r} {w!r} {h!r}")
        (directory / f"{record.image_id}.txt").write_text(
            "\n".join(lines) + ("\n" if lines else ""), encoding="utf-8"
        )


def write_yolo_detections(det: DetectionSet, directory: str | Path) -> None:
    """Write a detection set as a yolo-txt directory (one txt per image)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / _IMAGES_CSV).write_text(_images_csv_text(det.images), encoding="utf-8")
    for record in det.images:
        lines = []
        ordered = sorted(det.detections_for(record.image_id), key=lambda s: (s.box.corners(), s.score))
        for scored in ordered:
            cx, cy, w, h = _yolo_fields(scored.box, record)
            lines.append(f"0 {cx!r} {cy!r} {w!r} {h!r} {scored.score!r}")
        (directory / f"{record.image_id}.txt").write_text(
            "\n".join(lines) + ("\n" if lines else ""), encoding="utf-8"
        )


# ---------------------------------------------------------------------------
# counts CSV


def parse_count_series(data: bytes | str, source: str | None = None) -> CountSeries:
    """Parse a counts CSV; out-of-order rows are an error, never re-sorted."""
    text = _decode_text(data, source)
    lines = text.replace("\r\n", "\n").replace("\r", "\n").split("\n")
    if not lines or lines[0] != _COUNTS_HEADER:
        raise ParseError(f"first line must be {_COUNTS_HEADER!r}", source=source, line=1)
    observations: list[tuple[int, int]] = []
    previous_day = None
    for line_no, line in enumerate(lines[1:], start=2):
        if line == "":
            continue
        fields = line.split(",")
        if len(fields) != 2:
            raise ParseError(f"expected 2 fields, got {len(fields)}", source=source, line=line_no)
        try:
            day, count = int(fields[0]), int(fields[1])
        except ValueError as exc:
            raise ParseError(f"non-integer field: {exc}", source=source, line=line_no) from exc
        if day < 0 or count < 0:
            raise ValidationError(f"line {line_no}: day and count must be non-negative")
        if previous_day is not None and day <= previous_day:
            raise ValidationError(f"line {line_no}: days must be strictly increasing, got {previous_day} then {day}")
        previous_day = day
        observations.append((day, count))
    return CountSeries(tuple(observations))


def serialize_count_series(series: CountSeries) -> str:
    lines = [_COUNTS_HEADER] + [f"{day},{count}" for day, count in series.observations]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# path-level helpers


def load_ground_truth(path: str | Path, fmt: str = FORMAT_COCO) -> GroundTruthSet:
    if fmt == FORMAT_COCO:
        return parse_coco_ground_truth(Path(path).read_bytes(), source=str(path))
    if fmt == FORMAT_YOLO:
        return read_yolo_ground_truth(path)
    raise ValidationError(f"unknown format {fmt!r}; expected one of {FORMATS}")


def load_detections(path: str | Path, fmt: str = FORMAT_COCO) -> DetectionSet:
    if fmt == FORMAT_COCO:
        return parse_coco_detections(Path(path).read_bytes(), source=str(path))
    if fmt == FORMAT_YOLO:
        return read_yolo_detections(path)
    raise ValidationError(f"unknown format {fmt!r}; expected one of {FORMATS}")


# ---------------------------------------------------------------------------
# train/validation/test split


def split_dataset(
    gt: GroundTruthSet, ratios: tuple[float, float, float], seed: int
) -> tuple[GroundTruthSet, GroundTruthSet, GroundTruthSet]:
    """Partition a dataset into train/validation/test subsets.

    Bucket sizes are ``floor(N * ratio)`` with leftover images assigned
    train-first.  Image ids are sorted, then shuffled with a Fisher-Yates
    permutation from :class:`random.Random` (MT19937) seeded with ``seed``,
    so a given seed always yields the same partition.
    """
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise InvalidRatio(f"ratios must be three positive numbers, got {ratios!r}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise InvalidRatio(f"ratios must sum to 1, got {ratios!r} (sum {sum(ratios)!r})")

    ids = sorted(record.image_id for record in gt.images)
    random.Random(seed).shuffle(ids)

    n = len(ids)
    sizes = [math.floor(n * r) for r in ratios]
    for i in range(n - sum(sizes)):
        sizes[i % 3] += 1  # remainders go train, then val, then test

    cuts = (sizes[0], sizes[0] + sizes[1])
    buckets = (set(ids[: cuts[0]]), set(ids[cuts[0] : cuts[1]]), set(ids[cuts[1] :]))

    def subset(selected: set[str]) -> GroundTruthSet:
        images = tuple(r for r in gt.images if r.image_id in selected)
        boxes = {i: gt.boxes[i] for i in gt.boxes if i in selected}
        return GroundTruthSet(images=images, boxes=boxes)

    return subset(buckets[0]), subset(buckets[1]), subset(buckets[2])
