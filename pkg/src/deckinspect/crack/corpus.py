"""Synthetic crack images with known centre lines."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage
from skimage.draw import line as draw_line

from .image import GrayImage, save_gray, save_mask

_FOOTPRINTS = {
    1: np.ones((1, 1), dtype=bool),
    2: np.ones((2, 2), dtype=bool),
    3: np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool),
}


@dataclass(frozen=True)
class CorpusParams:
    size: tuple[int, int] = (256, 256)
    n_cracks: tuple[int, int] = (1, 3)
    widths: tuple[int, int] = (1, 3)
    contrast: tuple[float, float] = (70.0, 110.0)
    background: tuple[float, float] = (150.0, 200.0)
    illumination: float = 40.0  # peak-to-peak ramp across the image
    texture_sigma: float = 3.0
    salt_pepper: float = 0.003
    gap_probability: float = 0.5
    gap_length: tuple[float, float] = (4.0, 8.0)
    gap_contrast: float = 0.15
    segment_length: tuple[float, float] = (25.0, 60.0)
    vertices: tuple[int, int] = (3, 6)
    max_turn_deg: float = 35.0
    min_length: float = 50.0
    margin: int = 12
    min_separation: float = 30.0


@dataclass
class CrackSample:
    image: GrayImage
    truth: np.ndarray  # full crack body
    polylines: list[np.ndarray] = field(default_factory=list)  # (k, 2) as (x, y) pixel centres
    widths: list[int] = field(default_factory=list)

    @property
    def lengths_px(self) -> list[float]:
        return [polyline_length(p) for p in self.polylines]


def polyline_length(p: np.ndarray) -> float:
    return float(np.sum(np.hypot(*np.diff(np.asarray(p, float), axis=0).T)))


def _random_polyline(rng: np.random.Generator, prm: CorpusParams) -> np.ndarray | None:
    h, w = prm.size
    m = prm.margin
    pts = [np.array([rng.uniform(m, w - m), rng.uniform(m, h - m)])]
    heading = rng.uniform(0, 2 * math.pi)
    for _ in range(int(rng.integers(prm.vertices[0], prm.vertices[1] + 1)) - 1):
        heading += math.radians(rng.uniform(-prm.max_turn_deg, prm.max_turn_deg))
        step = rng.uniform(*prm.segment_length)
        p = pts[-1] + step * np.array([math.cos(heading), math.sin(heading)])
        if not (m <= p[0] <= w - m and m <= p[1] <= h - m):
            break
        pts.append(p)
    if len(pts) < 2:
        return None
    poly = np.rint(np.array(pts))
    return poly if polyline_length(poly) >= prm.min_length else None


def _rasterize(poly: np.ndarray, shape) -> tuple[np.ndarray, np.ndarray]:
    """Centre-line pixels of ``poly`` and their arclength from its start."""
    rows, cols, arc = [], [], []
    s0 = 0.0
    for a, b in zip(poly[:-1], poly[1:]):
        rr, cc = draw_line(int(a[1]), int(a[0]), int(b[1]), int(b[0]))
        seg = b - a
        L = float(np.hypot(*seg))
        t = ((cc - a[0]) * seg[0] + (rr - a[1]) * seg[1]) / (L * L) if L > 0 else np.zeros(rr.size)
        rows.append(rr)
        cols.append(cc)
        arc.append(s0 + t * L)
        s0 += L
    rr, cc, s = np.concatenate(rows), np.concatenate(cols), np.concatenate(arc)
    ok = (rr >= 0) & (rr < shape[0]) & (cc >= 0) & (cc < shape[1])
    return np.column_stack([rr[ok], cc[ok]]), s[ok]


def background(rng: np.random.Generator, prm: CorpusParams, shape) -> np.ndarray:
    """Bright concrete with a linear illumination ramp and fine texture."""
    h, w = shape
    yy, xx = np.mgrid[0:h, 0:w]
    theta = rng.uniform(0, 2 * math.pi)
    ramp = xx * math.cos(theta) + yy * math.sin(theta)
    ramp = (ramp - ramp.min()) / max(np.ptp(ramp), 1e-9) - 0.5
    return rng.uniform(*prm.background) + prm.illumination * ramp + prm.texture_sigma * rng.standard_normal((h, w))


def paint_crack(drop: np.ndarray, truth: np.ndarray, poly: np.ndarray, width: int, contrast: float, gap=None, gap_contrast: float = 0.15) -> None:
    """Darken ``drop`` and mark ``truth`` along ``poly``; ``gap`` is an arclength interval drawn faint."""
    px, arc = _rasterize(poly, drop.shape)
    if len(px) == 0:
        return
    strength = np.full(len(px), float(contrast))
    if gap is not None:
        strength[(arc >= gap[0]) & (arc <= gap[1])] *= gap_contrast
    line_drop = np.zeros(drop.shape)
    line_drop[px[:, 0], px[:, 1]] = strength
    body = np.zeros(drop.shape, dtype=bool)
    body[px[:, 0], px[:, 1]] = True
    fp = _FOOTPRINTS[width]
    np.maximum(drop, ndimage.grey_dilation(line_drop, footprint=fp), out=drop)
    truth |= ndimage.binary_dilation(body, structure=fp)


def finish(rng: np.random.Generator, img: np.ndarray, prm: CorpusParams) -> np.ndarray:
    """Salt-and-pepper impulses, then quantise to 8 bits."""
    h, w = img.shape
    n_sp = int(round(prm.salt_pepper * h * w))
    if n_sp:
        flat = rng.choice(h * w, size=n_sp, replace=False)
        img.ravel()[flat] = np.where(rng.random(n_sp) < 0.5, 0.0, 255.0)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def generate_sample(rng: np.random.Generator, prm: CorpusParams = CorpusParams(), scale: float = 1e-3, image_id: str = "") -> CrackSample:
    h, w = prm.size
    img = background(rng, prm, (h, w))
    truth = np.zeros((h, w), dtype=bool)
    drop = np.zeros((h, w))
    polylines, widths = [], []
    n_target = int(rng.integers(prm.n_cracks[0], prm.n_cracks[1] + 1))
    for _ in range(200):
        if len(polylines) == n_target:
            break
        poly = _random_polyline(rng, prm)
        if poly is None:
            continue
        px, _ = _rasterize(poly, (h, w))
        if truth.any():
            dist = ndimage.distance_transform_edt(~truth)
            if dist[px[:, 0], px[:, 1]].min() < prm.min_separation:
                continue
        width = int(rng.integers(prm.widths[0], prm.widths[1] + 1))
        contrast = rng.uniform(*prm.contrast)
        gap = None
        if rng.random() < prm.gap_probability:
            total = polyline_length(poly)
            g = rng.uniform(*prm.gap_length)
            s0 = rng.uniform(0.3 * total, 0.7 * total - g)
            gap = (s0, s0 + g)
        paint_crack(drop, truth, poly, width, contrast, gap, prm.gap_contrast)
        polylines.append(poly)
        widths.append(width)
    img = finish(rng, img - drop, prm)
    return CrackSample(GrayImage(img, scale, image_id), truth, polylines, widths)


def generate_corpus(n: int = 50, seed: int = 0, prm: CorpusParams = CorpusParams(), scale: float = 1e-3) -> list[CrackSample]:
    return [
        generate_sample(np.random.default_rng([seed, k]), prm, scale, f"crack_{k:03d}")
        for k in range(n)
    ]


def write_corpus(samples: list[CrackSample], directory: str | Path) -> list[Path]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    written = []
    truth = []
    for s in samples:
        p = d / f"{s.image.image_id}.png"
        save_gray(s.image.intensities, p)
        m = d / f"{s.image.image_id}_truth.png"
        save_mask(s.truth, m)
        written += [p, m]
        truth.append({
            "image_id": s.image.image_id,
            "scale_m_per_px": s.image.scale,
            "polylines_px": [poly.tolist() for poly in s.polylines],
            "widths_px": s.widths,
            "lengths_m": [round(L * s.image.scale, 9) for L in s.lengths_px],
        })
    gt = d / "ground_truth.json"
    gt.write_text(json.dumps(truth, indent=1, sort_keys=True) + "\n")
    written.append(gt)
    return written


def params_dict(prm: CorpusParams) -> dict:
    return asdict(prm)
