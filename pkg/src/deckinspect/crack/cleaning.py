"""Binarization, neighbourhood cleaning and two-stage noise removal."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from skimage.filters import threshold_otsu

from ..errors import InvalidInputError
from .gradients import GradientField

EIGHT = np.ones((3, 3), dtype=int)
_RING = np.array([[1, 1, 1], [1, 0, 1], [1, 1, 1]])


def otsu_level(magnitude: np.ndarray) -> float:
    m = np.asarray(magnitude, dtype=float)
    if m.size == 0 or m.max() == m.min():
        return float(m.max()) if m.size else 0.0
    return float(threshold_otsu(m))


def threshold_crack_pixels(field: GradientField, tau: float | str = "otsu") -> np.ndarray:
    """Pixels whose gradient magnitude exceeds ``tau`` (or the Otsu level)."""
    if isinstance(tau, str):
        if tau != "otsu":
            raise InvalidInputError(f"tau must be a number or 'otsu', got {tau!r}")
        tau = otsu_level(field.magnitude)
    if tau < 0:
        raise InvalidInputError("tau must be nonnegative")
    return field.magnitude > tau


def neighbour_count(mask: np.ndarray) -> np.ndarray:
    return ndimage.convolve(mask.astype(np.int32), _RING, mode="constant", cval=0)


def morphological_clean(mask: np.ndarray, fraction: float = 5 / 8, passes: int = 2) -> np.ndarray:
    """Drop pixels with no set neighbour and set pixels whose neighbourhood is mostly set.

    Both rules read the mask from the start of the pass.
    """
    if not 0 <= fraction < 1:
        raise InvalidInputError("fraction must lie in [0, 1)")
    m = np.asarray(mask, dtype=bool)
    for _ in range(passes):
        n = neighbour_count(m)
        nxt = (m & (n > 0)) | (~m & (n > fraction * 8))
        if np.array_equal(nxt, m):
            break
        m = nxt
    return m


def label8(mask: np.ndarray) -> tuple[np.ndarray, int]:
    return ndimage.label(np.asarray(mask, dtype=bool), structure=EIGHT)


def remove_small_components(mask: np.ndarray, min_pixels: int) -> np.ndarray:
    if min_pixels < 1:
        raise InvalidInputError("min_pixels must be at least 1")
    labels, n = label8(mask)
    if n == 0:
        return np.zeros_like(mask, dtype=bool)
    sizes = np.bincount(labels.ravel())
    keep = sizes >= min_pixels
    keep[0] = False
    return keep[labels]


@dataclass(frozen=True)
class CrackRegion:
    label: int
    pixels: np.ndarray  # (n, 2) row, col
    centroid: tuple[float, float]  # (x, y) = (col, row) means
    area: int


def crack_regions(mask: np.ndarray) -> list[CrackRegion]:
    labels, n = label8(mask)
    out = []
    for lab, sl in enumerate(ndimage.find_objects(labels), start=1):
        if sl is None:
            continue
        rr, cc = np.nonzero(labels[sl] == lab)
        rr = rr + sl[0].start
        cc = cc + sl[1].start
        out.append(CrackRegion(lab, np.column_stack([rr, cc]), (float(cc.mean()), float(rr.mean())), int(rr.size)))
    return out


def region_distance(a: CrackRegion, b: CrackRegion) -> float:
    return math.hypot(a.centroid[0] - b.centroid[0], a.centroid[1] - b.centroid[1])


def remove_noise_by_region(regions: list[CrackRegion], t_d: float, t_a: float) -> list[CrackRegion]:
    """Drop regions that are both small (area < t_a) and near another region (< t_d).

    A region with no other region to compare against is kept.
    """
    if not (t_d > 0 and t_a > 0):
        raise InvalidInputError("T_d and T_a must be positive")
    if len(regions) < 2:
        return list(regions)
    c = np.array([r.centroid for r in regions])
    d = np.hypot(c[:, None, 0] - c[None, :, 0], c[:, None, 1] - c[None, :, 1])
    np.fill_diagonal(d, np.inf)
    nearest = d.min(axis=1)
    return [r for r, dn in zip(regions, nearest) if not (r.area < t_a and dn < t_d)]


def regions_to_mask(regions: list[CrackRegion], shape: tuple[int, int]) -> np.ndarray:
    m = np.zeros(shape, dtype=bool)
    for r in regions:
        m[r.pixels[:, 0], r.pixels[:, 1]] = True
    return m
