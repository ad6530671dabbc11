"""Eight directional 3x3 gradient kernels and the per-pixel strongest response."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..errors import InvalidInputError
from .image import GrayImage

K0 = np.array([[1, 0, -1], [1, 0, -1], [1, 0, -1]])
K1 = np.array([[0, -1, -1], [1, 0, -1], [1, 1, 0]])
K2 = np.array([[-1, -1, -1], [0, 0, 0], [1, 1, 1]])
K3 = np.array([[-1, -1, 0], [-1, 0, 1], [0, 1, 1]])
# variant of the 7*pi/4 kernel with +1 in row 1, column 2; it sums to 2
K7_UNCORRECTED = np.array([[1, 1, 0], [1, 0, 1], [0, -1, -1]])
K7 = np.array([[1, 1, 0], [1, 0, -1], [0, -1, -1]])

KERNEL_SETS = ("standard", "uncorrected", "rotation")


def kernel_bank(kernel_set: str = "standard") -> list[np.ndarray]:
    """Kernels for directions k*pi/4, k = 0..7.

    ``standard``: directions 4, 5 and 6 are transposes of 2, 1 and 2 (so 4
    and 6 coincide) and every kernel is zero-sum.
    ``uncorrected``: as ``standard`` but with the non-zero-sum 7 kernel.
    ``rotation``: each direction k+4 is the negation of direction k.
    """
    if kernel_set == "rotation":
        base = [K0, K1, K2, K3]
        return [k.copy() for k in base] + [-k for k in base]
    if kernel_set not in KERNEL_SETS:
        raise InvalidInputError(f"kernel_set must be one of {KERNEL_SETS}")
    k7 = K7_UNCORRECTED if kernel_set == "uncorrected" else K7
    return [K0.copy(), K1.copy(), K2.copy(), K3.copy(), K2.T.copy(), K1.T.copy(), K2.T.copy(), k7.copy()]


def directional_gradients(img: GrayImage | np.ndarray, kernel_set: str = "standard") -> np.ndarray:
    """Stack of eight convolution responses, shape (8, rows, cols).

    True convolution (kernel flipped) with edge-replicating borders. Integer
    images give exact integer responses.
    """
    a = img.intensities if isinstance(img, GrayImage) else np.asarray(img)
    if a.ndim != 2 or a.shape[0] < 3 or a.shape[1] < 3:
        raise InvalidInputError(f"gradient kernels need at least a 3x3 image, got {a.shape}")
    a = a.astype(np.int64) if np.issubdtype(a.dtype, np.integer) else a.astype(float)
    return np.stack([ndimage.convolve(a, k.astype(a.dtype), mode="nearest") for k in kernel_bank(kernel_set)])


@dataclass
class GradientField:
    magnitude: np.ndarray
    orientation: np.ndarray  # direction index k, angle k*pi/4

    @property
    def angle(self) -> np.ndarray:
        return self.orientation * (math.pi / 4)


def gradient_magnitude_orientation(responses: np.ndarray) -> GradientField:
    r = np.abs(np.asarray(responses))
    if r.ndim != 3 or r.shape[0] != 8:
        raise InvalidInputError("expected eight response grids")
    # argmax returns the first maximum, so ties go to the smallest k
    k = np.argmax(r, axis=0)
    return GradientField(np.take_along_axis(r, k[None], axis=0)[0], k)
