"""Impact-echo thickness and delamination grading."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

from ..errors import InvalidInputError
from .spectrum import TimeSignal, amplitude_spectrum, average_spectra, dominant_frequency

BETA1_RANGE = (0.945, 0.957)
IE_CLASSES = ("good", "fair", "poor", "serious")


class BetaRangeWarning(UserWarning):
    pass


@dataclass(frozen=True)
class IEBands:
    """Ratio bands on ``f_IE / f_full``; flexural peaks below ``flexural_ratio``."""

    good_tolerance: float = 0.1
    fair_upper: float = 1.5
    flexural_ratio: float = 0.4


@dataclass
class IEResult:
    f_ie: float
    depth_h: float
    condition: str
    f_dominant: float
    beta_in_range: bool = True

    @property
    def severity(self) -> int:
        return IE_CLASSES.index(self.condition)


def ie_depth(f_ie: float, c_p: float, beta1: float = 0.95) -> float:
    """Reflector depth ``beta1 * c_p / f_ie``.

    A correction factor outside the normal-concrete range triggers a
    :class:`BetaRangeWarning` but still returns the value.
    """
    if not (math.isfinite(f_ie) and f_ie > 0):
        raise InvalidInputError(f"f_IE must be positive, got {f_ie}")
    if not (math.isfinite(c_p) and c_p > 0):
        raise InvalidInputError(f"P-wave velocity must be positive, got {c_p}")
    if not BETA1_RANGE[0] <= beta1 <= BETA1_RANGE[1]:
        warnings.warn(f"beta1={beta1} outside {BETA1_RANGE}", BetaRangeWarning, stacklevel=2)
    return beta1 * c_p / f_ie


def full_thickness_frequency(thickness: float, c_p: float, beta1: float = 0.95) -> float:
    return beta1 * c_p / thickness


def ie_classify(
    f_ie: float,
    f_full: float,
    f_dominant: float | None = None,
    bands: IEBands = IEBands(),
) -> str:
    """Grade a test point from its thickness-mode and dominant frequencies.

    ``f_dominant`` is the strongest peak of the whole spectrum; when it sits in
    the flexural band the point is serious regardless of ``f_ie``.
    """
    if not f_full > 0:
        raise InvalidInputError("full-thickness frequency must be positive")
    dom = f_ie if f_dominant is None else f_dominant
    if dom < bands.flexural_ratio * f_full:
        return "serious"
    r = f_ie / f_full
    if abs(r - 1.0) <= bands.good_tolerance:
        return "good"
    if r < 1.0 or r <= bands.fair_upper:
        return "fair"
    return "poor"


def analyze_ie(
    signals: Sequence[TimeSignal],
    thickness: float = 0.2,
    c_p: float = 4000.0,
    beta1: float = 0.95,
    bands: IEBands = IEBands(),
    window: str = "hann",
    zero_pad: int = 4,
    min_frequency: float = 1000.0,
) -> IEResult:
    """Average channel spectra, pick the dominant and thickness-mode peaks."""
    if not signals:
        raise InvalidInputError("no IE channels")
    nfft = zero_pad * signals[0].n
    spec = average_spectra([amplitude_spectrum(s, window, nfft) for s in signals])
    f_full = full_thickness_frequency(thickness, c_p, beta1)
    nyq = 0.5 * signals[0].sample_rate
    f_dom = dominant_frequency(spec, (min_frequency, 0.95 * nyq))
    f_ie = dominant_frequency(spec, (bands.flexural_ratio * f_full, 0.95 * nyq))
    in_range = BETA1_RANGE[0] <= beta1 <= BETA1_RANGE[1]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BetaRangeWarning)
        depth = ie_depth(f_ie, c_p, beta1)
    return IEResult(f_ie, depth, ie_classify(f_ie, f_full, f_dom, bands), f_dom, in_range)
