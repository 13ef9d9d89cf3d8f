"""Command-line client for the panicle pipeline.

Subcommands mirror the service endpoints: ``evaluate``, ``flowering``,
``tile``, ``merge``, ``split``, and ``synth``, plus ``serve`` to run the
HTTP service itself.  By default each command talks to an embedded
in-process instance of the service, so no server needs to be running;
``--server URL`` points the same commands at a remote instance instead.

Exit codes are stable for scripting: 0 on success, 1 for unreadable or
syntactically malformed inputs, 2 for validation or domain failures.  All
outputs are UTF-8 with LF endings and contain no timestamps, so rerunning a
command with identical inputs produces byte-identical files.
"""

from __future__ import annotations

import asyncio
import json
import sys
from pathlib import Path

import click
import httpx

from . import __version__
from .datasets import (
    FORMAT_COCO,
    FORMATS,
    DetectionSet,
    ImageRecord,
    load_detections,
    load_ground_truth,
    parse_count_series,
    serialize_coco_detections,
    serialize_coco_ground_truth,
)
from .errors import ParseError, ValidationError
from .geometry import BoundingBox, ScoredBox

DEFAULT_BASE_URL = "http://pipeline.local"


class ServiceClient:
    """POSTs requests to a remote service, or to an in-process app when no
    server URL is configured."""

    def __init__(self, server: str | None = None):
        self._server = server

    def post(self, path: str, payload: dict) -> tuple[int, dict]:
        if self._server:
            try:
                with httpx.Client(base_url=self._server, timeout=120.0) as client:
                    response = client.post(path, json=payload)
            except httpx.HTTPError as exc:
                _fail(2, f"cannot reach server {self._server}: {exc}")
            return response.status_code, _body_of(response)
        return asyncio.run(self._post_embedded(path, payload))

    async def _post_embedded(self, path: str, payload: dict) -> tuple[int, dict]:
        from .service import create_app

        transport = httpx.ASGITransport(app=create_app())
        async with httpx.AsyncClient(
            transport=transport, base_url=DEFAULT_BASE_URL, timeout=120.0
        ) as client:
            response = await client.post(path, json=payload)
        return response.status_code, _body_of(response)


def _body_of(response: httpx.Response) -> dict:
    try:
        body = response.json()
    except ValueError:
        return {"message": response.text}
    return body if isinstance(body, dict) else {"message": str(body)}


def _fail(code: int, message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _ensure_ok(status: int, body: dict) -> None:
    if status < 400:
        return
    message = body.get("message") or json.dumps(body.get("detail", body))
    _fail(1 if body.get("kind") == "parse" else 2, message)


def _load_document(path: str, fmt: str, detections: bool) -> dict:
    """Read an interchange file (or yolo directory) into a request document."""
    try:
        if fmt == FORMAT_COCO:
            text = Path(path).read_text(encoding="utf-8")
            document = json.loads(text)
            if not isinstance(document, dict):
                raise ParseError("top level must be a JSON object", source=path)
            return document
        loaded = load_detections(path, fmt) if detections else load_ground_truth(path, fmt)
        serialized = (
            serialize_coco_detections(loaded) if detections else serialize_coco_ground_truth(loaded)
        )
        return json.loads(serialized)
    except FileNotFoundError:
        _fail(1, f"file not found: {path}")
    except IsADirectoryError:
        _fail(1, f"expected a file, got a directory: {path}")
    except UnicodeDecodeError as exc:
        _fail(1, f"{path}: not valid UTF-8: {exc}")
    except json.JSONDecodeError as exc:
        _fail(1, f"{path}: invalid JSON: {exc}")
    except ParseError as exc:
        _fail(1, str(exc))
    except ValidationError as exc:
        _fail(2, str(exc))


def _load_detection_set(path: str, fmt: str) -> DetectionSet:
    """Read and fully validate a detection file through the dataset parser."""
    try:
        return load_detections(path, fmt)
    except FileNotFoundError:
        _fail(1, f"file not found: {path}")
    except IsADirectoryError:
        _fail(1, f"expected a file, got a directory: {path}")
    except ParseError as exc:
        _fail(1, str(exc))
    except ValidationError as exc:
        _fail(2, str(exc))


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        _fail(1, f"file not found: {path}")
    except (IsADirectoryError, UnicodeDecodeError) as exc:
        _fail(1, f"cannot read {path}: {exc}")


def _write(out_dir: str, name: str, text: str) -> Path:
    directory = Path(out_dir)
    directory.mkdir(parents=True, exist_ok=True)
    target = directory / name
    target.write_text(text, encoding="utf-8")
    return target


def _dump_json(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


server_option = click.option(
    "--server",
    default=None,
    envvar="PANICLE_PIPELINE_SERVER",
    help="URL of a running service; defaults to an embedded in-process instance.",
)
out_option = click.option(
    "--out", default=".", show_default=True, help="Directory for output files."
)
format_option = click.option(
    "--format",
    "fmt",
    type=click.Choice(FORMATS),
    default=FORMAT_COCO,
    show_default=True,
    help="Interchange format of the input files.",
)


@click.group()
@click.version_option(version=__version__, prog_name="panicle-pipeline")
def main():
    """Panicle detection evaluation and flowering-time estimation."""


@main.command()
@click.argument("ground_truth", type=click.Path())
@click.argument("detections", type=click.Path())
@format_option
@click.option("--iou", default=0.5, show_default=True, help="IoU threshold for matching.")
@click.option("--score-floor", default=0.25, show_default=True, help="Score floor for counting.")
@click.option("--min-area", default=0.0, show_default=True, help="Minimum box area for counting.")
@click.option("--interpolated", is_flag=True, help="Apply right-max precision interpolation to AP.")
@server_option
@out_option
def evaluate(ground_truth, detections, fmt, iou, score_floor, min_area, interpolated, server, out):
    """Score a detection file against ground truth (AP, MAPE, MAE, RMSE)."""
    payload = {
        "ground_truth": _load_document(ground_truth, fmt, detections=False),
        "detections": _load_document(detections, fmt, detections=True),
        "iou_threshold": iou,
        "count_score_floor": score_floor,
        "min_area": min_area,
        "interpolated_ap": interpolated,
    }
    status, body = ServiceClient(server).post("/evaluate", payload)
    _ensure_ok(status, body)
    table = body.pop("table")
    _write(out, "report.json", _dump_json(body))
    _write(out, "report.txt", table)
    click.echo(table, nl=False)


@main.command()
@click.option("--counts", "counts_path", type=click.Path(), default=None, help="Counts CSV input.")
@click.option(
    "--detections",
    "detections_path",
    type=click.Path(),
    default=None,
    help="Detection file whose images carry days_after_planting.",
)
@format_option
@click.option("--score-floor", default=0.25, show_default=True, help="Score floor for counting.")
@click.option("--min-area", default=0.0, show_default=True, help="Minimum box area for counting.")
@server_option
@out_option
def flowering(counts_path, detections_path, fmt, score_floor, min_area, server, out):
    """Estimate the flowering day from multi-date panicle counts.

    Takes either a counts CSV or a multi-date detection file; when both are
    given the explicit counts win.
    """
    payload: dict = {"score_floor": score_floor, "min_area": min_area}
    if counts_path is not None:
        try:
            series = parse_count_series(_read_text(counts_path), source=counts_path)
        except ParseError as exc:
            _fail(1, str(exc))
        except ValidationError as exc:
            _fail(2, str(exc))
        payload["observations"] = [
            {"days_after_planting": day, "count": count} for day, count in series.observations
        ]
    elif detections_path is not None:
        payload["detections"] = _load_document(detections_path, fmt, detections=True)
    else:
        _fail(2, "need --counts or --detections")

    status, body = ServiceClient(server).post("/flowering", payload)
    _ensure_ok(status, body)
    _write(out, "curve.csv", body.pop("curve_csv"))
    _write(out, "curve.svg", body.pop("curve_svg"))
    _write(out, "estimate.json", _dump_json(body))
    click.echo(
        f"flowering day: {body['flowering_day']:.2f} "
        f"(ultimate count {body['ultimate_count']}, half level {body['half_level']:g})"
    )


def _grid_options(command):
    for option in (
        click.option("--mosaic-width", type=int, required=True),
        click.option("--mosaic-height", type=int, required=True),
        click.option("--tile-width", type=int, required=True),
        click.option("--tile-height", type=int, required=True),
        click.option("--overlap-x", type=int, default=0, show_default=True),
        click.option("--overlap-y", type=int, default=0, show_default=True),
    ):
        command = option(command)
    return command


@main.command()
@_grid_options
@server_option
@out_option
def tile(mosaic_width, mosaic_height, tile_width, tile_height, overlap_x, overlap_y, server, out):
    """Write the tile-grid manifest for an external cropping tool."""
    payload = {
        "mosaic_width": mosaic_width,
        "mosaic_height": mosaic_height,
        "tile_width": tile_width,
        "tile_height": tile_height,
        "overlap_x": overlap_x,
        "overlap_y": overlap_y,
    }
    status, body = ServiceClient(server).post("/grid", payload)
    _ensure_ok(status, body)
    target = _write(out, "manifest.csv", body["manifest_csv"])
    click.echo(f"{len(body['tiles'])} tiles -> {target}")


@main.command()
@click.argument("detections", type=click.Path())
@format_option
@_grid_options
@click.option("--seam-iou", default=0.5, show_default=True, help="IoU above which seam duplicates merge.")
@server_option
@out_option
def merge(
    detections, fmt, mosaic_width, mosaic_height, tile_width, tile_height,
    overlap_x, overlap_y, seam_iou, server, out,
):
    """Merge per-tile detections into mosaic coordinates.

    The detection file's image ids must be tile ids of the grid; boxes are
    tile-local.  The merged output is a single-image detection file in
    global coordinates.
    """
    detection_set = _load_detection_set(detections, fmt)
    per_tile: dict[str, list] = {}
    for image_id in detection_set.image_ids():
        for scored in detection_set.detections_for(image_id):
            box = scored.box
            per_tile.setdefault(image_id, []).append(
                {
                    "x_min": box.x_min,
                    "y_min": box.y_min,
                    "x_max": box.x_max,
                    "y_max": box.y_max,
                    "score": scored.score,
                }
            )
    payload = {
        "grid": {
            "mosaic_width": mosaic_width,
            "mosaic_height": mosaic_height,
            "tile_width": tile_width,
            "tile_height": tile_height,
            "overlap_x": overlap_x,
            "overlap_y": overlap_y,
        },
        "per_tile": per_tile,
        "seam_iou": seam_iou,
    }
    status, body = ServiceClient(server).post("/merge", payload)
    _ensure_ok(status, body)
    merged_boxes = tuple(
        ScoredBox(BoundingBox(m["x_min"], m["y_min"], m["x_max"], m["y_max"]), m["score"])
        for m in body["merged"]
    )
    merged_set = DetectionSet(
        images=(ImageRecord("mosaic", "mosaic.png", mosaic_width, mosaic_height),),
        detections={"mosaic": merged_boxes} if merged_boxes else {},
    )
    target = _write(out, "merged.json", serialize_coco_detections(merged_set))
    click.echo(f"merged {body['input_count']} -> {body['merged_count']} detections -> {target}")


@main.command()
@click.argument("ground_truth", type=click.Path())
@format_option
@click.option("--train", default=0.8, show_default=True)
@click.option("--val", default=0.1, show_default=True)
@click.option("--test", default=0.1, show_default=True)
@click.option("--seed", default=0, show_default=True)
@server_option
@out_option
def split(ground_truth, fmt, train, val, test, seed, server, out):
    """Split a dataset into train/val/test coco-like-json files."""
    payload = {
        "ground_truth": _load_document(ground_truth, fmt, detections=False),
        "train": train,
        "val": val,
        "test": test,
        "seed": seed,
    }
    status, body = ServiceClient(server).post("/split", payload)
    _ensure_ok(status, body)
    for name in ("train", "val", "test"):
        _write(out, f"{name}.json", _dump_json(body[name]))
    click.echo("sizes: train={} val={} test={}".format(*body["sizes"]))


@main.command()
@click.option("--n-plants", default=120, show_default=True)
@click.option("--field-width", default=800, show_default=True)
@click.option("--field-height", default=600, show_default=True)
@click.option("--emergence-midpoint", default=70.0, show_default=True)
@click.option("--emergence-rate", default=0.4, show_default=True)
@click.option("--dates", default="65,68,70,76,79,83", show_default=True, help="Comma-separated days.")
@click.option("--box-size-mean", default=28.0, show_default=True)
@click.option("--box-size-sd", default=4.0, show_default=True)
@click.option("--jitter-sd", default=2.0, show_default=True)
@click.option("--duplicate-rate", default=0.05, show_default=True)
@click.option("--miss-rate", default=0.05, show_default=True)
@click.option("--score-noise-sd", default=0.1, show_default=True)
@click.option("--seed", default=0, show_default=True)
@server_option
@out_option
def synth(
    n_plants, field_width, field_height, emergence_midpoint, emergence_rate, dates,
    box_size_mean, box_size_sd, jitter_sd, duplicate_rate, miss_rate, score_noise_sd,
    seed, server, out,
):
    """Generate a synthetic multi-date scenario with known ground truth."""
    try:
        date_list = [int(d) for d in dates.split(",") if d != ""]
    except ValueError:
        _fail(2, f"--dates must be comma-separated integers, got {dates!r}")
    payload = {
        "n_plants": n_plants,
        "field_width": field_width,
        "field_height": field_height,
        "emergence_midpoint": emergence_midpoint,
        "emergence_rate": emergence_rate,
        "dates": date_list,
        "box_size_mean": box_size_mean,
        "box_size_sd": box_size_sd,
        "jitter_sd": jitter_sd,
        "duplicate_rate": duplicate_rate,
        "miss_rate": miss_rate,
        "score_noise_sd": score_noise_sd,
        "seed": seed,
    }
    status, body = ServiceClient(server).post("/synth", payload)
    _ensure_ok(status, body)
    _write(out, "ground_truth.json", _dump_json(body["ground_truth"]))
    _write(out, "detections.json", _dump_json(body["detections"]))
    _write(out, "counts.csv", body["counts_csv"])
    truth = {
        "true_flowering_day": body["true_flowering_day"],
        "true_counts": [[o["days_after_planting"], o["count"]] for o in body["true_counts"]],
        "seed": seed,
    }
    _write(out, "truth.json", _dump_json(truth))
    click.echo(f"scenario written to {out} (true flowering day {body['true_flowering_day']:g})")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
