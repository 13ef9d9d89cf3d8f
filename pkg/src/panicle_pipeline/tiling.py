"""Orthomosaic tile grids and cross-seam duplicate merging.

A large field mosaic is cropped into fixed-size tiles before detection, so
detections come back in tile-local coordinates and panicles that straddle a
seam can be reported by more than one tile.  This module builds the grid,
translates boxes between local and global coordinates, and merges per-tile
detections with non-maximum suppression at a configurable seam IoU.

Edge tiles are clamped (shifted inward) rather than padded, so every tile
has the full requested size and matches fixed-size detector inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

from .errors import InvalidGeometry, OutOfTileBounds, UnknownTile
from .geometry import ScoredBox, nms

DEFAULT_SEAM_IOU = 0.5


@dataclass(frozen=True)
class Tile:
    tile_id: str
    origin_x: int
    origin_y: int


@dataclass(frozen=True)
class TileGrid:
    """A tiling of a mosaic; every mosaic pixel lies in at least one tile."""

    mosaic_width: int
    mosaic_height: int
    tile_width: int
    tile_height: int
    overlap_x: int
    overlap_y: int
    tiles: tuple[Tile, ...]

    def tile(self, tile_id: str) -> Tile:
        for tile in self.tiles:
            if tile.tile_id == tile_id:
                return tile
        raise UnknownTile(f"no tile {tile_id!r} in grid")


def _origins(mosaic: int, tile: int, overlap: int) -> list[int]:
    step = tile - overlap
    count = math.ceil((mosaic - overlap) / step)
    return [min(i * step, mosaic - tile) for i in range(count)]


def build_grid(
    mosaic_width: int,
    mosaic_height: int,
    tile_width: int,
    tile_height: int,
    overlap_x: int = 0,
    overlap_y: int = 0,
) -> TileGrid:
    """Lay out a covering grid of tiles over the mosaic.

    Origins advance by ``tile - overlap``; the final row/column is clamped to
    the mosaic edge so the last tile still has full size.
    """
    dims = {
        "mosaic_width": mosaic_width,
        "mosaic_height": mosaic_height,
        "tile_width": tile_width,
        "tile_height": tile_height,
    }
    for name, value in dims.items():
        if isinstance(value, bool) or not isinstance(value, int) or value <= 0:
            raise InvalidGeometry(f"{name} must be a positive integer, got {value!r}")
    for name, value in (("overlap_x", overlap_x), ("overlap_y", overlap_y)):
        if isinstance(value, bool) or not isinstance(value, int) or value < 0:
            raise InvalidGeometry(f"{name} must be a non-negative integer, got {value!r}")
    if tile_width > mosaic_width or tile_height > mosaic_height:
        raise InvalidGeometry(
            f"tile {tile_width}x{tile_height} exceeds mosaic {mosaic_width}x{mosaic_height}"
        )
    if overlap_x >= tile_width or overlap_y >= tile_height:
        raise InvalidGeometry("overlap must be smaller than the tile dimensions")

    tiles = []
    for row, oy in enumerate(_origins(mosaic_height, tile_height, overlap_y)):
        for col, ox in enumerate(_origins(mosaic_width, tile_width, overlap_x)):
            tiles.append(Tile(f"r{row}c{col}", ox, oy))
    return TileGrid(
        mosaic_width=mosaic_width,
        mosaic_height=mosaic_height,
        tile_width=tile_width,
        tile_height=tile_height,
        overlap_x=overlap_x,
        overlap_y=overlap_y,
        tiles=tuple(tiles),
    )


def _check_in_tile(grid: TileGrid, scored: ScoredBox, tile_id: str) -> None:
    box = scored.box
    if box.x_min < 0 or box.y_min < 0 or box.x_max > grid.tile_width or box.y_max > grid.tile_height:
        raise OutOfTileBounds(
            f"box {box.corners()} does not fit tile {tile_id!r} "
            f"({grid.tile_width}x{grid.tile_height})"
        )


def to_global(grid: TileGrid, tile_id: str, local_box: ScoredBox) -> ScoredBox:
    """Translate a tile-local box to mosaic coordinates; score is unchanged."""
    tile = grid.tile(tile_id)
    _check_in_tile(grid, local_box, tile_id)
    return local_box.translate(tile.origin_x, tile.origin_y)


def to_local(grid: TileGrid, tile_id: str, global_box: ScoredBox) -> ScoredBox:
    """Translate a mosaic-coordinate box into a tile's local frame."""
    tile = grid.tile(tile_id)
    local = global_box.translate(-tile.origin_x, -tile.origin_y)
    _check_in_tile(grid, local, tile_id)
    return local


def merge_tiles(
    grid: TileGrid,
    per_tile: Mapping[str, Iterable[ScoredBox]],
    seam_iou: float = DEFAULT_SEAM_IOU,
) -> list[ScoredBox]:
    """Remap per-tile detections to global coordinates and deduplicate seams.

    The same panicle reported by two overlapping tiles appears as two nearly
    identical global boxes; greedy NMS at ``seam_iou`` keeps the higher
    scored one.  Deterministic tie-breaking makes the result independent of
    tile enumeration order.
    """
    remapped = []
    for tile_id in sorted(per_tile):
        for scored in per_tile[tile_id]:
            remapped.append(to_global(grid, tile_id, scored))
    return nms(remapped, seam_iou)


def grid_manifest_csv(grid: TileGrid) -> str:
    """Manifest for an external cropping tool: one row per tile."""
    lines = ["tile_id,origin_x,origin_y,width,height"]
    for tile in grid.tiles:
        lines.append(
            f"{tile.tile_id},{tile.origin_x},{tile.origin_y},{grid.tile_width},{grid.tile_height}"
        )
    return "\n".join(lines) + "\n"
