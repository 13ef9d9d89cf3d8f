import pytest
from fastapi.testclient import TestClient

from panicle_pipeline.service import create_app


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


def coco_gt(images, annotations):
    return {"images": images, "annotations": annotations}


IMG = {"id": "img-1", "file_name": "img-1.png", "width": 800, "height": 600}
GT_DOC = coco_gt([IMG], [{"image_id": "img-1", "bbox": [10, 10, 50, 50]}])
DET_DOC = coco_gt([IMG], [{"image_id": "img-1", "bbox": [10, 10, 50, 50], "score": 0.9}])


class TestHealth:
    def test_health(self, client):
        response = client.get("/health")
        assert response.status_code == 200
        assert response.json()["status"] == "ok"


class TestEvaluateEndpoint:
    def test_perfect_detection(self, client):
        response = client.post("/evaluate", json={"ground_truth": GT_DOC, "detections": DET_DOC})
        assert response.status_code == 200
        body = response.json()
        assert body["ap"] == 1.0
        assert body["mape"] == 0.0
        assert "AP" in body["table"]
        assert body["config"]["iou_threshold"] == 0.5

    def test_thresholds_echoed(self, client):
        response = client.post(
            "/evaluate",
            json={
                "ground_truth": GT_DOC,
                "detections": DET_DOC,
                "iou_threshold": 0.75,
                "count_score_floor": 0.4,
                "min_area": 99.0,
            },
        )
        config = response.json()["config"]
        assert config == {
            "iou_threshold": 0.75,
            "ap_score_floor": 0.0,
            "count_score_floor": 0.4,
            "min_area": 99.0,
            "interpolated_ap": False,
        }

    def test_invalid_document_maps_to_422_validation(self, client):
        bad = coco_gt([IMG], [{"image_id": "img-1", "bbox": [10, 10, -5, 50]}])
        response = client.post("/evaluate", json={"ground_truth": bad, "detections": DET_DOC})
        assert response.status_code == 422
        assert response.json()["kind"] == "validation"

    def test_zero_gt_count_maps_to_422(self, client):
        empty_gt = coco_gt([IMG], [])
        response = client.post("/evaluate", json={"ground_truth": empty_gt, "detections": DET_DOC})
        assert response.status_code == 422


class TestFloweringEndpoint:
    def observations(self, series):
        return [{"days_after_planting": d, "count": c} for d, c in series]

    def test_from_observations(self, client, manual_counts):
        response = client.post(
            "/flowering", json={"observations": self.observations(manual_counts.observations)}
        )
        assert response.status_code == 200
        body = response.json()
        assert abs(body["flowering_day"] - 68.0) <= 1.0
        assert body["ultimate_count"] == 280
        assert body["half_level"] == 140.0
        assert body["curve_csv"].startswith("day,fitted_count\n")
        assert body["curve_svg"].startswith("<svg")

    def test_from_detections(self, client):
        images = [
            {"id": f"d{day}", "file_name": f"d{day}.png", "width": 800, "height": 600,
             "days_after_planting": day}
            for day in (65, 68, 70, 76)
        ]
        annotations = [
            {"image_id": f"d{day}", "bbox": [10 * k, 10, 8, 8], "score": 0.9}
            for i, day in enumerate((65, 68, 70, 76))
            for k in range(i + 1)
        ]
        response = client.post(
            "/flowering",
            json={"detections": coco_gt(images, annotations), "score_floor": 0.5},
        )
        assert response.status_code == 200
        counts = [o["count"] for o in response.json()["observations"]]
        assert counts == [1, 2, 3, 4]

    def test_observations_win_over_detections(self, client, manual_counts):
        response = client.post(
            "/flowering",
            json={
                "observations": self.observations(manual_counts.observations),
                "detections": coco_gt([], []),
            },
        )
        assert response.status_code == 200
        assert response.json()["ultimate_count"] == 280

    def test_needs_some_input(self, client):
        response = client.post("/flowering", json={})
        assert response.status_code == 422

    def test_too_few_dates(self, client):
        response = client.post(
            "/flowering", json={"observations": self.observations([(65, 10), (68, 20), (70, 30)])}
        )
        assert response.status_code == 422
        body = response.json()
        assert body["kind"] == "validation"
        assert body["error"] == "InsufficientData"

    def test_no_crossing_is_domain_error(self, client):
        response = client.post(
            "/flowering",
            json={"observations": self.observations([(60, 200), (65, 210), (70, 220), (75, 230)])},
        )
        assert response.status_code == 422
        assert response.json()["kind"] == "domain"
        assert response.json()["error"] == "NoCrossing"


class TestGridAndMergeEndpoints:
    def test_grid_manifest(self, client):
        response = client.post(
            "/grid",
            json={"mosaic_width": 800, "mosaic_height": 600, "tile_width": 800, "tile_height": 300},
        )
        assert response.status_code == 200
        body = response.json()
        assert len(body["tiles"]) == 2
        assert body["manifest_csv"].splitlines()[1] == "r0c0,0,0,800,300"

    def test_invalid_grid(self, client):
        response = client.post(
            "/grid",
            json={"mosaic_width": 100, "mosaic_height": 100, "tile_width": 500, "tile_height": 100},
        )
        assert response.status_code == 422
        assert response.json()["kind"] == "validation"

    def test_merge_suppresses_duplicates(self, client):
        # tiles overlap for x in [460, 540]; the panicle sits inside that band
        box = {"x_min": 480.0, "y_min": 100.0, "x_max": 520.0, "y_max": 140.0}
        payload = {
            "grid": {
                "mosaic_width": 1000,
                "mosaic_height": 300,
                "tile_width": 540,
                "tile_height": 300,
                "overlap_x": 80,
            },
            "per_tile": {
                "r0c0": [dict(box, score=0.9)],
                "r0c1": [dict(box, x_min=box["x_min"] - 460, x_max=box["x_max"] - 460, score=0.8)],
            },
            "seam_iou": 0.5,
        }
        response = client.post("/merge", json=payload)
        assert response.status_code == 200
        body = response.json()
        assert body["input_count"] == 2
        assert body["merged_count"] == 1
        assert body["merged"][0]["score"] == 0.9
        assert body["merged"][0]["x_min"] == 480.0

    def test_merge_unknown_tile(self, client):
        payload = {
            "grid": {"mosaic_width": 100, "mosaic_height": 100, "tile_width": 100, "tile_height": 100},
            "per_tile": {"r5c5": [{"x_min": 0, "y_min": 0, "x_max": 1, "y_max": 1, "score": 0.5}]},
        }
        response = client.post("/merge", json=payload)
        assert response.status_code == 422


class TestSplitEndpoint:
    def make_gt(self, n):
        images = [
            {"id": f"im{i:03d}", "file_name": f"im{i:03d}.png", "width": 64, "height": 64}
            for i in range(n)
        ]
        return coco_gt(images, [])

    def test_sizes_and_partition(self, client):
        response = client.post("/split", json={"ground_truth": self.make_gt(10), "seed": 3})
        assert response.status_code == 200
        body = response.json()
        assert body["sizes"] == [8, 1, 1]
        ids = [img["id"] for part in ("train", "val", "test") for img in body[part]["images"]]
        assert sorted(ids) == [f"im{i:03d}" for i in range(10)]

    def test_no_null_fields_in_documents(self, client):
        response = client.post("/split", json={"ground_truth": self.make_gt(4), "seed": 0})
        assert "null" not in response.text

    def test_deterministic(self, client):
        first = client.post("/split", json={"ground_truth": self.make_gt(12), "seed": 9}).json()
        second = client.post("/split", json={"ground_truth": self.make_gt(12), "seed": 9}).json()
        assert first == second

    def test_bad_ratios(self, client):
        response = client.post(
            "/split", json={"ground_truth": self.make_gt(4), "train": 0.5, "val": 0.2, "test": 0.2}
        )
        assert response.status_code == 422
        assert response.json()["error"] == "InvalidRatio"


class TestSynthEndpoint:
    def test_generates_parseable_scenario(self, client):
        response = client.post("/synth", json={"seed": 4, "n_plants": 40})
        assert response.status_code == 200
        body = response.json()
        assert body["true_flowering_day"] == 70.0
        assert len(body["ground_truth"]["images"]) == 6
        evaluate = client.post(
            "/evaluate",
            json={"ground_truth": body["ground_truth"], "detections": body["detections"]},
        )
        assert evaluate.status_code == 200

    def test_invalid_spec(self, client):
        response = client.post("/synth", json={"n_plants": -3})
        assert response.status_code == 422
        assert response.json()["error"] == "InvalidSpec"

    def test_malformed_body_is_422(self, client):
        response = client.post("/synth", json={"dates": "not-a-list"})
        assert response.status_code == 422
