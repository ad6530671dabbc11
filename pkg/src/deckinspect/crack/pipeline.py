"""Image to crack mask, centre-line paths and summary statistics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from ..errors import InvalidInputError
from .cleaning import (
    crack_regions,
    morphological_clean,
    regions_to_mask,
    remove_noise_by_region,
    remove_small_components,
    threshold_crack_pixels,
)
from .gradients import KERNEL_SETS, directional_gradients, gradient_magnitude_orientation
from .image import GrayImage
from .paths import CrackPath, LinkingParams, crack_statistics, estimate_width, link_cracks, skeleton_paths


@dataclass(frozen=True)
class DenoiseParams:
    min_component_pixels: int = 20
    t_d: float = 30.0
    t_a: float = 40.0

    def __post_init__(self):
        if self.min_component_pixels < 1 or not (self.t_d > 0 and self.t_a > 0):
            raise InvalidInputError("denoise thresholds must be positive")


@dataclass(frozen=True)
class CrackParams:
    tau: float | str = "otsu"
    kernel_set: str = "standard"
    clean_fraction: float = 5 / 8
    clean_passes: int = 2
    linking: LinkingParams = field(default_factory=LinkingParams)
    denoise: DenoiseParams = field(default_factory=DenoiseParams)
    width_step: int = 5

    def __post_init__(self):
        if self.kernel_set not in KERNEL_SETS:
            raise InvalidInputError(f"kernel_set must be one of {KERNEL_SETS}")
        if not isinstance(self.tau, str) and self.tau < 0:
            raise InvalidInputError("tau must be nonnegative")
        if self.width_step < 1:
            raise InvalidInputError("width_step must be at least 1")


@dataclass
class CrackDetection:
    image_id: str
    mask: np.ndarray
    paths: list[CrackPath]
    stats: dict


def detect_cracks(img: GrayImage, params: CrackParams = CrackParams()) -> CrackDetection:
    field_ = gradient_magnitude_orientation(directional_gradients(img, params.kernel_set))
    mask = threshold_crack_pixels(field_, params.tau)
    mask = morphological_clean(mask, params.clean_fraction, params.clean_passes)
    mask = remove_small_components(mask, params.denoise.min_component_pixels)
    # specks go before linking so the linker cannot bridge to them
    regions = remove_noise_by_region(crack_regions(mask), params.denoise.t_d, params.denoise.t_a)
    mask = regions_to_mask(regions, mask.shape)
    paths = skeleton_paths(mask, img.scale)
    paths, bridges = link_cracks(paths, params.linking)
    if len(bridges):
        mask[bridges[:, 0], bridges[:, 1]] = True
    paths = [estimate_width(p, mask, params.width_step) for p in paths]
    return CrackDetection(img.image_id, mask, paths, crack_statistics(paths, img.scale))


def evaluate_mask(pred: np.ndarray, truth: np.ndarray, tolerance: float = 2.0) -> dict:
    """Precision and recall where a pixel counts if the other mask lies within ``tolerance`` px."""
    pred = np.asarray(pred, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    if pred.shape != truth.shape:
        raise InvalidInputError("masks differ in shape")
    d_truth = ndimage.distance_transform_edt(~truth) if truth.any() else np.full(truth.shape, np.inf)
    d_pred = ndimage.distance_transform_edt(~pred) if pred.any() else np.full(pred.shape, np.inf)
    tp_pred = int((pred & (d_truth <= tolerance)).sum())
    tp_truth = int((truth & (d_pred <= tolerance)).sum())
    n_pred, n_truth = int(pred.sum()), int(truth.sum())
    return {
        "tp_pred": tp_pred,
        "n_pred": n_pred,
        "tp_truth": tp_truth,
        "n_truth": n_truth,
        "precision": tp_pred / n_pred if n_pred else 1.0,
        "recall": tp_truth / n_truth if n_truth else 1.0,
    }
