"""World-frame deck cracks rendered into per-station camera tiles."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..navigation import Pose2D
from .corpus import CorpusParams, background, finish, paint_crack
from .georef import CameraFootprint, deck_to_pixel
from .image import GrayImage


@dataclass(frozen=True)
class DeckCrack:
    polyline: np.ndarray  # (k, 2) deck metres
    width_px: int
    contrast: float


def random_deck_cracks(
    extent: tuple[float, float, float, float],
    n: int,
    seed: int,
    prm: CorpusParams = CorpusParams(),
    scale: float = 0.005,
) -> list[DeckCrack]:
    """Random-walk polylines scattered over the deck, sized like the corpus in pixels."""
    rng = np.random.default_rng([seed, 7])
    x0, y0, x1, y1 = extent
    cracks = []
    for _ in range(n):
        p = np.array([rng.uniform(x0, x1), rng.uniform(y0, y1)])
        heading = rng.uniform(0, 2 * math.pi)
        pts = [p]
        for _ in range(int(rng.integers(prm.vertices[0], prm.vertices[1] + 1)) - 1):
            heading += math.radians(rng.uniform(-prm.max_turn_deg, prm.max_turn_deg))
            step = rng.uniform(*prm.segment_length) * scale
            q = pts[-1] + step * np.array([math.cos(heading), math.sin(heading)])
            if not (x0 <= q[0] <= x1 and y0 <= q[1] <= y1):
                break
            pts.append(q)
        if len(pts) < 2:
            continue
        cracks.append(DeckCrack(np.array(pts), int(rng.integers(prm.widths[0], prm.widths[1] + 1)), float(rng.uniform(*prm.contrast))))
    return cracks


def render_tile(
    cracks: list[DeckCrack],
    pose: Pose2D,
    fp: CameraFootprint,
    rng: np.random.Generator,
    prm: CorpusParams = CorpusParams(),
    image_id: str = "",
) -> tuple[GrayImage, np.ndarray]:
    """Camera image seen from ``pose`` and its crack truth mask."""
    shape = (fp.rows, fp.cols)
    img = background(rng, prm, shape)
    drop = np.zeros(shape)
    truth = np.zeros(shape, dtype=bool)
    for c in cracks:
        # pixel centres sit at integer + 0.5
        px = deck_to_pixel(c.polyline, pose, fp) - 0.5
        lo, hi = px.min(axis=0), px.max(axis=0)
        if hi[0] < -5 or hi[1] < -5 or lo[0] > fp.cols + 5 or lo[1] > fp.rows + 5:
            continue
        paint_crack(drop, truth, np.rint(px), c.width_px, c.contrast)
    scale = 0.5 * (fp.scale_along + fp.scale_across)
    return GrayImage(finish(rng, img - drop, prm), scale, image_id), truth
