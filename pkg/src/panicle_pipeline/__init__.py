"""Panicle detection evaluation and flowering-time estimation.

Core building blocks:

* :mod:`panicle_pipeline.geometry` -- boxes, IoU, non-maximum suppression
* :mod:`panicle_pipeline.datasets` -- interchange formats and dataset split
* :mod:`panicle_pipeline.tiling` -- orthomosaic tile grids and seam merging
* :mod:`panicle_pipeline.evaluation` -- matching, AP, MAPE/MAE/RMSE
* :mod:`panicle_pipeline.flowering` -- cubic count curve and flowering day
* :mod:`panicle_pipeline.synthetic` -- deterministic synthetic scenarios

The HTTP service lives in :mod:`panicle_pipeline.service` and the
command-line client in :mod:`panicle_pipeline.cli`.
"""

__version__ = "0.1.0"

from .datasets import (
    CountSeries,
    DetectionSet,
    GroundTruthSet,
    ImageRecord,
    load_detections,
    load_ground_truth,
    parse_coco_detections,
    parse_coco_ground_truth,
    parse_count_series,
    serialize_coco_detections,
    serialize_coco_ground_truth,
    serialize_count_series,
    split_dataset,
)
from .errors import ParseError, PipelineError, ValidationError
from .evaluation import (
    average_precision,
    count_detections,
    count_errors,
    evaluate_detections,
    match,
    pr_curve,
)
from .flowering import (
    CubicFit,
    FloweringEstimate,
    build_series,
    curve_csv,
    curve_svg,
    fit_cubic,
    flowering_time,
    series_from_detections,
)
from .geometry import BoundingBox, ScoredBox, iou, nms
from .synthetic import ScenarioSpec, SyntheticScenario, generate, write_scenario
from .tiling import TileGrid, build_grid, grid_manifest_csv, merge_tiles, to_global, to_local

__all__ = [
    "BoundingBox",
    "CountSeries",
    "CubicFit",
    "DetectionSet",
    "FloweringEstimate",
    "GroundTruthSet",
    "ImageRecord",
    "ParseError",
    "PipelineError",
    "ScenarioSpec",
    "ScoredBox",
    "SyntheticScenario",
    "TileGrid",
    "ValidationError",
    "average_precision",
    "build_grid",
    "build_series",
    "count_detections",
    "count_errors",
    "curve_csv",
    "curve_svg",
    "evaluate_detections",
    "fit_cubic",
    "flowering_time",
    "generate",
    "grid_manifest_csv",
    "iou",
    "load_detections",
    "load_ground_truth",
    "match",
    "merge_tiles",
    "nms",
    "parse_coco_detections",
    "parse_coco_ground_truth",
    "parse_count_series",
    "pr_curve",
    "serialize_coco_detections",
    "serialize_coco_ground_truth",
    "serialize_count_series",
    "series_from_detections",
    "split_dataset",
    "to_global",
    "to_local",
    "write_scenario",
]
