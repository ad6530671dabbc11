"""Pixel to deck-frame mapping for body-mounted cameras and the crack-map mosaic.

Image columns run forward along the robot's heading and rows run from the
robot's left side to its right. Pixel coordinates are continuous, with the
image covering [0, cols] x [0, rows]; the centre of pixel (c, r) sits at
(c + 0.5, r + 0.5).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from skimage.measure import approximate_polygon

from ..errors import InvalidInputError
from ..navigation import Pose2D
from .paths import CrackPath, smooth_chain


@dataclass(frozen=True)
class CameraFootprint:
    along_m: float = 0.871  # 2 ft station spacing leaves 30 % overlap
    across_m: float = 1.83
    offset_m: tuple[float, float] = (0.0, 0.0)  # footprint centre in the body frame
    cols: int = 174
    rows: int = 366

    def __post_init__(self):
        if not (self.along_m > 0 and self.across_m > 0):
            raise InvalidInputError("footprint dimensions must be positive")
        if self.cols < 3 or self.rows < 3:
            raise InvalidInputError("footprint raster must be at least 3x3")

    @property
    def scale_along(self) -> float:
        return self.along_m / self.cols

    @property
    def scale_across(self) -> float:
        return self.across_m / self.rows


def _body(pixel, fp: CameraFootprint) -> np.ndarray:
    p = np.asarray(pixel, dtype=float)
    bx = fp.offset_m[0] + (p[..., 0] / fp.cols - 0.5) * fp.along_m
    by = fp.offset_m[1] + (0.5 - p[..., 1] / fp.rows) * fp.across_m
    return np.stack([bx, by], axis=-1)


def georeference(pixel, pose: Pose2D, fp: CameraFootprint = CameraFootprint()) -> np.ndarray:
    """Deck-frame position of continuous pixel coordinates (col, row), vectorised."""
    p = np.asarray(pixel, dtype=float)
    if np.any(p[..., 0] < 0) or np.any(p[..., 0] > fp.cols) or np.any(p[..., 1] < 0) or np.any(p[..., 1] > fp.rows):
        raise InvalidInputError("pixel lies outside the image")
    b = _body(p, fp)
    c, s = math.cos(pose.heading), math.sin(pose.heading)
    return np.stack([pose.x + c * b[..., 0] - s * b[..., 1], pose.y + s * b[..., 0] + c * b[..., 1]], axis=-1)


def deck_to_pixel(points, pose: Pose2D, fp: CameraFootprint = CameraFootprint()) -> np.ndarray:
    """Inverse of :func:`georeference`; no bounds check."""
    q = np.asarray(points, dtype=float)
    dx, dy = q[..., 0] - pose.x, q[..., 1] - pose.y
    c, s = math.cos(pose.heading), math.sin(pose.heading)
    bx = c * dx + s * dy - fp.offset_m[0]
    by = -s * dx + c * dy - fp.offset_m[1]
    return np.stack([(bx / fp.along_m + 0.5) * fp.cols, (0.5 - by / fp.across_m) * fp.rows], axis=-1)


def inside_footprint(points, pose: Pose2D, fp: CameraFootprint) -> np.ndarray:
    px = deck_to_pixel(points, pose, fp)
    return (px[..., 0] >= 0) & (px[..., 0] <= fp.cols) & (px[..., 1] >= 0) & (px[..., 1] <= fp.rows)


@dataclass
class CrackMapEntry:
    crack_id: int
    polyline: np.ndarray  # (k, 2) deck metres
    length_m: float
    mean_width_m: float
    max_width_m: float
    source: str


@dataclass
class CrackMap:
    entries: list[CrackMapEntry]
    deck_extent: tuple[float, float, float, float]

    @property
    def total_length_m(self) -> float:
        return float(sum(e.length_m for e in self.entries))

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["id", "length_m", "mean_width_m", "max_width_m", "source", "polyline_xy_m"])
            for e in self.entries:
                poly = ";".join(f"{x:.4f} {y:.4f}" for x, y in e.polyline)
                w.writerow([e.crack_id, f"{e.length_m:.5f}", f"{e.mean_width_m:.5f}", f"{e.max_width_m:.5f}", e.source, poly])


@dataclass(frozen=True)
class Tile:
    tile_id: str
    pose: Pose2D
    paths: Sequence[CrackPath]


def _runs(keep: np.ndarray) -> list[tuple[int, int]]:
    out, start = [], None
    for k, v in enumerate(keep):
        if v and start is None:
            start = k
        elif not v and start is not None:
            out.append((start, k))
            start = None
    if start is not None:
        out.append((start, len(keep)))
    return out


def assemble_crack_map(
    tiles: Sequence[Tile],
    fp: CameraFootprint,
    deck_extent: tuple[float, float, float, float],
    sigma: float = 1.5,
) -> CrackMap:
    """Mosaic tile detections by pose.

    Tiles are taken in the given order; any crack point already covered by an
    earlier tile's footprint is cropped so overlap bands are not counted
    twice. Points outside the deck are dropped as well.
    """
    x0, y0, x1, y1 = deck_extent
    tol = min(fp.scale_along, fp.scale_across)
    reach = math.hypot(fp.along_m, fp.across_m) + math.hypot(*fp.offset_m) * 2
    entries: list[CrackMapEntry] = []
    for k, tile in enumerate(tiles):
        earlier = [t.pose for t in tiles[:k] if math.hypot(t.pose.x - tile.pose.x, t.pose.y - tile.pose.y) <= reach]
        for path in tile.paths:
            if len(path.pixels) < 2:
                continue
            chain = smooth_chain(path.pixels[:, ::-1].astype(float), sigma) + 0.5
            chain[:, 0] = np.clip(chain[:, 0], 0, fp.cols)
            chain[:, 1] = np.clip(chain[:, 1], 0, fp.rows)
            world = georeference(chain, tile.pose, fp)
            keep = (world[:, 0] >= x0) & (world[:, 0] <= x1) & (world[:, 1] >= y0) & (world[:, 1] <= y1)
            for pose in earlier:
                keep &= ~inside_footprint(world, pose, fp)
            for a, b in _runs(keep):
                if b - a < 2:
                    continue
                poly = approximate_polygon(world[a:b], tolerance=tol)
                length = float(np.sum(np.hypot(*np.diff(poly, axis=0).T)))
                entries.append(
                    CrackMapEntry(len(entries), poly, length, path.mean_width_m, path.max_width_m, tile.tile_id)
                )
    return CrackMap(entries, deck_extent)
