import pytest

from panicle_pipeline.datasets import CountSeries, DetectionSet, GroundTruthSet, ImageRecord
from panicle_pipeline.geometry import BoundingBox, ScoredBox


@pytest.fixture
def manual_counts() -> CountSeries:
    """Field-trial manual panicle counts across six flight dates."""
    return CountSeries(((65, 35), (68, 151), (70, 198), (76, 259), (79, 278), (83, 280)))


@pytest.fixture
def estimated_counts() -> CountSeries:
    """Detector-estimated counts for the same six flight dates."""
    return CountSeries(((65, 34), (68, 157), (70, 202), (76, 253), (79, 276), (83, 278)))


@pytest.fixture
def small_gt() -> GroundTruthSet:
    images = (
        ImageRecord("img-a", "a.png", 800, 600),
        ImageRecord("img-b", "b.png", 800, 600, days_after_planting=70),
    )
    boxes = {
        "img-a": (BoundingBox(10, 10, 60, 60), BoundingBox(100, 100, 180, 160)),
        "img-b": (BoundingBox(20, 30, 70, 90),),
    }
    return GroundTruthSet(images=images, boxes=boxes)


@pytest.fixture
def perfect_detections(small_gt) -> DetectionSet:
    """One detection per ground-truth box, scored 1.0."""
    detections = {
        image_id: tuple(ScoredBox(box, 1.0) for box in boxes)
        for image_id, boxes in small_gt.boxes.items()
    }
    return DetectionSet(images=small_gt.images, detections=detections)
