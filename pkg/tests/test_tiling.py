import random

import pytest
from hypothesis import given, settings, strategies as st

from panicle_pipeline.errors import InvalidGeometry, OutOfTileBounds, UnknownTile
from panicle_pipeline.geometry import BoundingBox, ScoredBox
from panicle_pipeline.tiling import build_grid, grid_manifest_csv, merge_tiles, to_global, to_local


class TestBuildGrid:
    def test_horizontal_halves(self):
        grid = build_grid(800, 600, 800, 300)
        assert [(t.origin_x, t.origin_y) for t in grid.tiles] == [(0, 0), (0, 300)]

    def test_single_tile_identity(self):
        grid = build_grid(640, 480, 640, 480)
        assert [(t.origin_x, t.origin_y) for t in grid.tiles] == [(0, 0)]

    def test_overlapping_grid_with_clamped_edge(self):
        grid = build_grid(1000, 1000, 512, 512, overlap_x=24, overlap_y=24)
        origins = {(t.origin_x, t.origin_y) for t in grid.tiles}
        assert origins == {(0, 0), (0, 488), (488, 0), (488, 488)}

    def test_clamped_final_column(self):
        grid = build_grid(520, 512, 512, 512)
        assert [(t.origin_x, t.origin_y) for t in grid.tiles] == [(0, 0), (8, 0)]

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(mosaic_width=100, mosaic_height=100, tile_width=200, tile_height=50),
            dict(mosaic_width=100, mosaic_height=100, tile_width=50, tile_height=50, overlap_x=50),
            dict(mosaic_width=0, mosaic_height=100, tile_width=50, tile_height=50),
            dict(mosaic_width=100, mosaic_height=100, tile_width=50, tile_height=50, overlap_y=-1),
        ],
    )
    def test_invalid_geometry(self, kwargs):
        with pytest.raises(InvalidGeometry):
            build_grid(**kwargs)

    @given(
        st.integers(1, 40),
        st.integers(1, 40),
        st.integers(1, 40),
        st.integers(1, 40),
        st.integers(0, 10),
        st.integers(0, 10),
    )
    @settings(max_examples=150)
    def test_every_pixel_covered(self, mw, mh, tw, th, ox, oy):
        if tw > mw or th > mh or ox >= tw or oy >= th:
            return
        grid = build_grid(mw, mh, tw, th, ox, oy)
        for x in range(mw):
            covered_x = any(t.origin_x <= x < t.origin_x + tw for t in grid.tiles)
            assert covered_x
        for y in range(mh):
            covered_y = any(t.origin_y <= y < t.origin_y + th for t in grid.tiles)
            assert covered_y

    def test_tile_count_formula(self):
        grid = build_grid(1000, 700, 512, 256, overlap_x=24, overlap_y=16)
        cols = -(-(1000 - 24) // (512 - 24))
        rows = -(-(700 - 16) // (256 - 16))
        assert len(grid.tiles) == cols * rows

    def test_manifest_csv(self):
        grid = build_grid(800, 600, 800, 300)
        assert grid_manifest_csv(grid) == (
            "tile_id,origin_x,origin_y,width,height\n"
            "r0c0,0,0,800,300\n"
            "r1c0,0,300,800,300\n"
        )


class TestRemap:
    def test_identity_translation(self):
        grid = build_grid(100, 100, 100, 100)
        scored = ScoredBox(BoundingBox(10, 20, 50, 60), 0.7)
        assert to_global(grid, "r0c0", scored) == scored

    def test_translation_arithmetic(self):
        grid = build_grid(2000, 1000, 1000, 600, overlap_x=0, overlap_y=200)
        tile = next(t for t in grid.tiles if (t.origin_x, t.origin_y) == (1000, 400))
        scored = ScoredBox(BoundingBox(10, 20, 50, 60), 0.9)
        remapped = to_global(grid, tile.tile_id, scored)
        assert remapped.box.corners() == (1010, 420, 1050, 460)
        assert remapped.score == 0.9

    def test_unknown_tile(self):
        grid = build_grid(100, 100, 100, 100)
        with pytest.raises(UnknownTile):
            to_global(grid, "r9c9", ScoredBox(BoundingBox(0, 0, 1, 1), 0.5))

    def test_out_of_tile_bounds(self):
        grid = build_grid(100, 100, 50, 50)
        with pytest.raises(OutOfTileBounds):
            to_global(grid, "r0c0", ScoredBox(BoundingBox(40, 40, 60, 60), 0.5))

    def test_round_trip_random_boxes(self):
        grid = build_grid(3000, 1200, 800, 600, overlap_x=100, overlap_y=100)
        rng = random.Random(42)
        for _ in range(2000):
            tile = rng.choice(grid.tiles)
            w = rng.randint(1, 200) / 4
            h = rng.randint(1, 200) / 4
            x = rng.randint(0, int((800 - w) * 4)) / 4
            y = rng.randint(0, int((600 - h) * 4)) / 4
            scored = ScoredBox(BoundingBox(x, y, x + w, y + h), rng.randint(0, 64) / 64)
            restored = to_local(grid, tile.tile_id, to_global(grid, tile.tile_id, scored))
            assert restored == scored


class TestMergeTiles:
    def test_single_tile_is_plain_remap(self):
        grid = build_grid(100, 100, 100, 100)
        boxes = [ScoredBox(BoundingBox(5, 5, 20, 20), 0.9), ScoredBox(BoundingBox(50, 50, 70, 70), 0.8)]
        assert merge_tiles(grid, {"r0c0": boxes}, seam_iou=0.5) == boxes

    def test_duplicate_across_seam_suppressed(self):
        grid = build_grid(190, 100, 100, 100, overlap_x=10)
        # same panicle seen by both tiles around the seam at x=90..100
        left = ScoredBox(BoundingBox(88, 40, 99, 60), 0.9)
        right_local = ScoredBox(BoundingBox(0, 40, 11, 60), 0.8)  # tile origin x=90
        merged = merge_tiles(grid, {"r0c0": [left], "r0c1": [right_local]}, seam_iou=0.5)
        assert len(merged) == 1
        assert merged[0].score == 0.9

    def test_disjoint_boxes_all_survive(self):
        grid = build_grid(200, 100, 100, 100)
        merged = merge_tiles(
            grid,
            {
                "r0c0": [ScoredBox(BoundingBox(10, 10, 30, 30), 0.6)],
                "r0c1": [ScoredBox(BoundingBox(10, 10, 30, 30), 0.7)],  # global x 110..130
            },
            seam_iou=0.5,
        )
        assert len(merged) == 2

    def test_order_of_tiles_does_not_matter(self):
        grid = build_grid(190, 190, 100, 100, overlap_x=10, overlap_y=10)
        rng = random.Random(3)
        per_tile = {}
        for tile in grid.tiles:
            per_tile[tile.tile_id] = [
                ScoredBox(BoundingBox(5 + i, 5, 25 + i, 25), rng.randint(0, 64) / 64)
                for i in range(3)
            ]
        forward = merge_tiles(grid, per_tile, seam_iou=0.5)
        reversed_map = dict(reversed(list(per_tile.items())))
        assert merge_tiles(grid, reversed_map, seam_iou=0.5) == forward

    def test_ten_straddling_panicles_merge_to_ten(self):
        # panicles scattered over a 2x2 overlapping grid; every tile reports
        # each panicle fully inside it, so straddlers are reported twice
        grid = build_grid(1000, 1000, 540, 540, overlap_x=80, overlap_y=80)
        rng = random.Random(17)
        panicles = []
        while len(panicles) < 10:
            x = rng.uniform(0, 970)
            y = rng.uniform(0, 970)
            box = BoundingBox(x, y, x + 30, y + 30)
            if all(
                (box.x_max < q.x_min or q.x_max < box.x_min or box.y_max < q.y_min or q.y_max < box.y_min)
                for q, _ in panicles
            ):
                panicles.append((box, 0.5 + len(panicles) / 40))
        per_tile = {t.tile_id: [] for t in grid.tiles}
        observations = 0
        for tile in grid.tiles:
            for box, score in panicles:
                local = box.translate(-tile.origin_x, -tile.origin_y)
                if 0 <= local.x_min and local.x_max <= 540 and 0 <= local.y_min and local.y_max <= 540:
                    per_tile[tile.tile_id].append(ScoredBox(local, score))
                    observations += 1
        assert observations > 10  # at least one panicle straddles a seam
        merged = merge_tiles(grid, per_tile, seam_iou=0.5)
        assert len(merged) == 10
