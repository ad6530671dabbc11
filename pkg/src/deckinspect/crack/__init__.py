"""Crack detection on deck surface images and georeferenced crack maps."""

from .cleaning import (
    CrackRegion,
    crack_regions,
    morphological_clean,
    remove_noise_by_region,
    remove_small_components,
    threshold_crack_pixels,
)
from .corpus import CorpusParams, CrackSample, generate_corpus, generate_sample
from .georef import CameraFootprint, CrackMap, Tile, assemble_crack_map, deck_to_pixel, georeference
from .gradients import GradientField, directional_gradients, gradient_magnitude_orientation, kernel_bank
from .image import GrayImage, load_image
from .paths import CrackPath, LinkingParams, crack_statistics, estimate_width, link_cost, link_cracks, skeleton_paths
from .pipeline import CrackDetection, CrackParams, DenoiseParams, detect_cracks, evaluate_mask

__all__ = [
    "CameraFootprint", "CorpusParams", "CrackDetection", "CrackMap", "CrackParams", "CrackPath", "CrackRegion",
    "CrackSample", "DenoiseParams", "GradientField", "GrayImage", "LinkingParams", "Tile", "assemble_crack_map",
    "crack_regions", "crack_statistics", "deck_to_pixel", "detect_cracks", "directional_gradients",
    "estimate_width", "evaluate_mask", "generate_corpus", "generate_sample", "georeference",
    "gradient_magnitude_orientation", "kernel_bank", "link_cost", "link_cracks", "load_image",
    "morphological_clean", "remove_noise_by_region", "remove_small_components", "skeleton_paths",
    "threshold_crack_pixels",
]
