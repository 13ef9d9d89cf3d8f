"""Pydantic request/response models for the HTTP service.

The models stay deliberately loose about annotation contents: documents are
re-validated by the strict dataset parsers server-side so the service and the
library reject exactly the same inputs.
"""

from __future__ import annotations

from pydantic import BaseModel, Field


class CocoImage(BaseModel):
    id: str
    file_name: str
    width: int
    height: int
    days_after_planting: int | None = None


class CocoAnnotation(BaseModel):
    image_id: str
    bbox: list[float]
    score: float | None = None


class CocoDocument(BaseModel):
    """A coco-like-json interchange document carried inside a request."""

    images: list[CocoImage] = Field(default_factory=list)
    annotations: list[CocoAnnotation] = Field(default_factory=list)


class ScoredBoxModel(BaseModel):
    x_min: float
    y_min: float
    x_max: float
    y_max: float
    score: float


class EvaluateRequest(BaseModel):
    ground_truth: CocoDocument
    detections: CocoDocument
    iou_threshold: float = 0.5
    count_score_floor: float = 0.25
    min_area: float = 0.0
    interpolated_ap: bool = False


class EvaluateResponse(BaseModel):
    ap: float
    mape: float
    mae: float
    rmse: float
    n_images: int
    true_positives: int
    false_positives: int
    false_negatives: int
    config: dict
    table: str


class Observation(BaseModel):
    days_after_planting: int
    count: int


class FloweringRequest(BaseModel):
    """Counts may come in directly or be derived from a detection document.

    When both are supplied the explicit observations win; the detection
    route requires every image to carry ``days_after_planting``.
    """

    observations: list[Observation] | None = None
    detections: CocoDocument | None = None
    score_floor: float = 0.25
    min_area: float = 0.0


class FloweringResponse(BaseModel):
    flowering_day: float
    ultimate_count: int
    half_level: float
    residual_rms: float
    bracket: tuple[float, float]
    coefficients: tuple[float, float, float, float]
    t_center: float
    observations: list[Observation]
    curve_csv: str
    curve_svg: str
    config: dict


class GridRequest(BaseModel):
    mosaic_width: int
    mosaic_height: int
    tile_width: int
    tile_height: int
    overlap_x: int = 0
    overlap_y: int = 0


class TileModel(BaseModel):
    tile_id: str
    origin_x: int
    origin_y: int


class GridResponse(BaseModel):
    tiles: list[TileModel]
    tile_width: int
    tile_height: int
    manifest_csv: str


class MergeRequest(BaseModel):
    grid: GridRequest
    per_tile: dict[str, list[ScoredBoxModel]]
    seam_iou: float = 0.5


class MergeResponse(BaseModel):
    merged: list[ScoredBoxModel]
    input_count: int
    merged_count: int
    config: dict


class SplitRequest(BaseModel):
    ground_truth: CocoDocument
    train: float = 0.8
    val: float = 0.1
    test: float = 0.1
    seed: int = 0


class SplitResponse(BaseModel):
    train: CocoDocument
    val: CocoDocument
    test: CocoDocument
    sizes: tuple[int, int, int]


class SynthRequest(BaseModel):
    n_plants: int = 120
    field_width: int = 800
    field_height: int = 600
    emergence_midpoint: float = 70.0
    emergence_rate: float = 0.4
    dates: list[int] = Field(default_factory=lambda: [65, 68, 70, 76, 79, 83])
    box_size_mean: float = 28.0
    box_size_sd: float = 4.0
    jitter_sd: float = 2.0
    duplicate_rate: float = 0.05
    miss_rate: float = 0.05
    score_noise_sd: float = 0.1
    seed: int = 0


class SynthResponse(BaseModel):
    ground_truth: CocoDocument
    detections: CocoDocument
    counts_csv: str
    true_flowering_day: float
    true_counts: list[Observation]
