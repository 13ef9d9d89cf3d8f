"""FastAPI application exposing the pipeline over HTTP.

Every endpoint is stateless: the request carries the documents, the response
carries the results, nothing persists between calls.  Incoming coco-like
documents are run through the same strict parsers the library applies to
files, so validation behaves identically over HTTP and on disk.  Pipeline
errors map onto HTTP statuses: 400 with ``kind="parse"`` for malformed
documents, 422 with ``kind="validation"`` or ``kind="domain"`` otherwise.
"""

from __future__ import annotations

import json

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from .. import __version__
from ..datasets import (
    CountSeries,
    DetectionSet,
    GroundTruthSet,
    parse_coco_detections,
    parse_coco_ground_truth,
    serialize_coco_detections,
    serialize_coco_ground_truth,
    serialize_count_series,
    split_dataset,
)
from ..errors import ParseError, PipelineError, ValidationError
from ..evaluation import evaluate_detections
from ..flowering import (
    curve_csv,
    curve_svg,
    estimate_to_dict,
    fit_cubic,
    flowering_time,
    series_from_detections,
)
from ..geometry import BoundingBox, ScoredBox
from ..synthetic import ScenarioSpec, generate
from ..tiling import build_grid, grid_manifest_csv, merge_tiles
from . import schemas


def _domain_ground_truth(document: schemas.CocoDocument) -> GroundTruthSet:
    return parse_coco_ground_truth(document.model_dump_json(exclude_none=True))


def _domain_detections(document: schemas.CocoDocument) -> DetectionSet:
    return parse_coco_detections(document.model_dump_json(exclude_none=True))


def _document_from_ground_truth(gt: GroundTruthSet) -> dict:
    return json.loads(serialize_coco_ground_truth(gt))


def _document_from_detections(det: DetectionSet) -> dict:
    return json.loads(serialize_coco_detections(det))


def _scored_box(model: schemas.ScoredBoxModel) -> ScoredBox:
    return ScoredBox(BoundingBox(model.x_min, model.y_min, model.x_max, model.y_max), model.score)


def _scored_model(scored: ScoredBox) -> schemas.ScoredBoxModel:
    box = scored.box
    return schemas.ScoredBoxModel(
        x_min=box.x_min, y_min=box.y_min, x_max=box.x_max, y_max=box.y_max, score=scored.score
    )


def create_app() -> FastAPI:
    app = FastAPI(
        title="panicle-pipeline",
        version=__version__,
        description=(
            "Panicle detection evaluation, orthomosaic tile merging, and "
            "flowering-time estimation for sorghum field trials."
        ),
    )

    @app.exception_handler(ParseError)
    async def parse_error_handler(_, exc: ParseError):
        return JSONResponse(status_code=400, content={"kind": "parse", "message": str(exc)})

    @app.exception_handler(PipelineError)
    async def pipeline_error_handler(_, exc: PipelineError):
        kind = "validation" if isinstance(exc, ValidationError) else "domain"
        return JSONResponse(
            status_code=422,
            content={"kind": kind, "error": type(exc).__name__, "message": str(exc)},
        )

    @app.get("/health")
    async def health():
        return {"status": "ok", "version": __version__}

    @app.post("/evaluate", response_model=schemas.EvaluateResponse)
    async def evaluate(request: schemas.EvaluateRequest):
        gt = _domain_ground_truth(request.ground_truth)
        det = _domain_detections(request.detections)
        report = evaluate_detections(
            gt,
            det,
            iou_threshold=request.iou_threshold,
            count_score_floor=request.count_score_floor,
            min_area=request.min_area,
            interpolated_ap=request.interpolated_ap,
        )
        payload = report.to_dict()
        payload["table"] = report.table()
        return payload

    @app.post("/flowering", response_model=schemas.FloweringResponse)
    async def flowering(request: schemas.FloweringRequest):
        if request.observations is not None:
            series = CountSeries(
                tuple((o.days_after_planting, o.count) for o in request.observations)
            )
        elif request.detections is not None:
            det = _domain_detections(request.detections)
            series = series_from_detections(
                det, score_floor=request.score_floor, min_area=request.min_area
            )
        else:
            raise ValidationError("request needs either observations or detections")
        fit = fit_cubic(series)
        estimate = flowering_time(series, fit)
        payload = estimate_to_dict(estimate, fit)
        payload["observations"] = [
            {"days_after_planting": day, "count": count} for day, count in series.observations
        ]
        payload["curve_csv"] = curve_csv(fit, series)
        payload["curve_svg"] = curve_svg(series, fit, estimate)
        payload["config"] = {"score_floor": request.score_floor, "min_area": request.min_area}
        return payload

    @app.post("/grid", response_model=schemas.GridResponse)
    async def grid(request: schemas.GridRequest):
        built = build_grid(
            request.mosaic_width,
            request.mosaic_height,
            request.tile_width,
            request.tile_height,
            request.overlap_x,
            request.overlap_y,
        )
        return {
            "tiles": [
                {"tile_id": t.tile_id, "origin_x": t.origin_x, "origin_y": t.origin_y}
                for t in built.tiles
            ],
            "tile_width": built.tile_width,
            "tile_height": built.tile_height,
            "manifest_csv": grid_manifest_csv(built),
        }

    @app.post("/merge", response_model=schemas.MergeResponse)
    async def merge(request: schemas.MergeRequest):
        built = build_grid(
            request.grid.mosaic_width,
            request.grid.mosaic_height,
            request.grid.tile_width,
            request.grid.tile_height,
            request.grid.overlap_x,
            request.grid.overlap_y,
        )
        per_tile = {
            tile_id: [_scored_box(m) for m in models]
            for tile_id, models in request.per_tile.items()
        }
        merged = merge_tiles(built, per_tile, seam_iou=request.seam_iou)
        return {
            "merged": [_scored_model(s) for s in merged],
            "input_count": sum(len(v) for v in per_tile.values()),
            "merged_count": len(merged),
            "config": {"seam_iou": request.seam_iou},
        }

    @app.post("/split", response_model=schemas.SplitResponse, response_model_exclude_none=True)
    async def split(request: schemas.SplitRequest):
        gt = _domain_ground_truth(request.ground_truth)
        train, val, test = split_dataset(
            gt, (request.train, request.val, request.test), seed=request.seed
        )
        return {
            "train": _document_from_ground_truth(train),
            "val": _document_from_ground_truth(val),
            "test": _document_from_ground_truth(test),
            "sizes": (len(train.images), len(val.images), len(test.images)),
        }

    @app.post("/synth", response_model=schemas.SynthResponse, response_model_exclude_none=True)
    async def synth(request: schemas.SynthRequest):
        spec = ScenarioSpec(
            n_plants=request.n_plants,
            field_width=request.field_width,
            field_height=request.field_height,
            emergence_midpoint=request.emergence_midpoint,
            emergence_rate=request.emergence_rate,
            dates=tuple(request.dates),
            box_size_mean=request.box_size_mean,
            box_size_sd=request.box_size_sd,
            jitter_sd=request.jitter_sd,
            duplicate_rate=request.duplicate_rate,
            miss_rate=request.miss_rate,
            score_noise_sd=request.score_noise_sd,
            seed=request.seed,
        )
        scenario = generate(spec)
        return {
            "ground_truth": _document_from_ground_truth(scenario.combined_ground_truth()),
            "detections": _document_from_detections(scenario.combined_detections()),
            "counts_csv": serialize_count_series(scenario.true_series),
            "true_flowering_day": scenario.true_flowering_day,
            "true_counts": [
                {"days_after_planting": day, "count": count}
                for day, count in scenario.true_series.observations
            ],
        }

    return app
