"""Grayscale images and raster I/O."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import InvalidInputError

LUMA = np.array([0.299, 0.587, 0.114])


@dataclass
class GrayImage:
    intensities: np.ndarray  # (rows, cols), values in [0, 255]
    scale: float = 1e-3  # metres per pixel
    image_id: str = ""

    def __post_init__(self):
        a = np.asarray(self.intensities)
        if a.ndim != 2:
            raise InvalidInputError(f"expected a 2-D intensity grid, got shape {a.shape}")
        if a.size and (a.min() < 0 or a.max() > 255):
            raise InvalidInputError("intensities must lie in [0, 255]")
        if not self.scale > 0:
            raise InvalidInputError("scale must be positive")
        self.intensities = a

    @property
    def height(self) -> int:
        return self.intensities.shape[0]

    @property
    def width(self) -> int:
        return self.intensities.shape[1]


def to_gray(pixels: np.ndarray) -> np.ndarray:
    """Luminance of an RGB(A) array; 2-D input passes through."""
    a = np.asarray(pixels, dtype=float)
    if a.ndim == 2:
        return a
    if a.ndim == 3 and a.shape[2] in (3, 4):
        return np.clip(a[..., :3] @ LUMA, 0, 255)
    raise InvalidInputError(f"unsupported pixel array shape {a.shape}")


def load_image(path: str | Path, scale: float = 1e-3) -> GrayImage:
    from PIL import Image, UnidentifiedImageError

    path = Path(path)
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode not in ("L", "RGB", "RGBA", "I", "I;16", "P"):
                im = im.convert("RGB")
            if im.mode == "P":
                im = im.convert("RGB")
            arr = np.asarray(im)
    except (UnidentifiedImageError, OSError) as exc:
        raise InvalidInputError(f"cannot read image {path}: {exc}") from exc
    if arr.dtype != np.uint8 and arr.ndim == 2:
        # 16-bit grayscale PGM/PNG
        arr = arr.astype(float) * (255.0 / max(float(arr.max()), 1.0))
    return GrayImage(np.rint(to_gray(arr)).astype(np.uint8), scale, path.stem)


def save_gray(arr: np.ndarray, path: str | Path) -> None:
    from PIL import Image

    Image.fromarray(np.clip(np.rint(arr), 0, 255).astype(np.uint8), mode="L").save(path)


def save_mask(mask: np.ndarray, path: str | Path) -> None:
    save_gray(np.where(mask, 255, 0), path)
