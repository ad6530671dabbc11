"""Surface-wave phase velocity between two receivers and the implied modulus."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import InvalidInputError
from .spectrum import TimeSignal

PA_PER_KSI = 6.894757293168361e6


@dataclass
class PhaseVelocityCurve:
    freqs: np.ndarray
    phase: np.ndarray
    velocity: np.ndarray
    coherence: np.ndarray
    valid: np.ndarray

    @property
    def mean_velocity(self) -> float:
        if not self.valid.any():
            return float("nan")
        return float(np.mean(self.velocity[self.valid]))


@dataclass
class USWResult:
    band_velocities: list[float]
    mean_velocity: float
    modulus_pa: float

    @property
    def modulus_gpa(self) -> float:
        return self.modulus_pa / 1e9

    @property
    def modulus_ksi(self) -> float:
        return self.modulus_pa / PA_PER_KSI


def _as_ensemble(sig) -> list[TimeSignal]:
    if isinstance(sig, TimeSignal):
        return [sig]
    sigs = list(sig)
    if not sigs:
        raise InvalidInputError("empty signal ensemble")
    return sigs


def usw_phase_velocity(
    sig_a: TimeSignal | Sequence[TimeSignal],
    sig_b: TimeSignal | Sequence[TimeSignal],
    d: float,
    band: tuple[float, float],
    coherence_gate: float = 0.9,
    zero_pad: int = 1,
) -> PhaseVelocityCurve:
    """Phase velocity ``2*pi*f*d / dphi`` across ``band``.

    Several records per receiver may be given; cross- and auto-spectra are
    averaged over them and the coherence is computed from those averages (one
    record gives coherence 1). The band phase is unwrapped along frequency and
    shifted by a multiple of 2*pi so that its straight-line fit passes closest
    to the origin. Points with nonpositive phase or coherence below the gate
    are flagged invalid and carry NaN velocity.
    """
    a_list, b_list = _as_ensemble(sig_a), _as_ensemble(sig_b)
    if len(a_list) != len(b_list):
        raise InvalidInputError("receiver ensembles differ in size")
    if not d > 0:
        raise InvalidInputError("receiver spacing must be positive")
    fs = a_list[0].sample_rate
    n = a_list[0].n
    for s in a_list + b_list:
        if s.sample_rate != fs:
            raise InvalidInputError("receivers must share one sample rate")
        if s.n != n:
            raise InvalidInputError("receivers must share one record length")
    nfft = n * zero_pad
    A = np.array([np.fft.rfft(s.samples, nfft) for s in a_list])
    B = np.array([np.fft.rfft(s.samples, nfft) for s in b_list])
    s_ab = np.mean(np.conj(A) * B, axis=0)
    s_aa = np.mean(np.abs(A) ** 2, axis=0)
    s_bb = np.mean(np.abs(B) ** 2, axis=0)
    freqs = np.fft.rfftfreq(nfft, 1.0 / fs)

    lo, hi = band
    idx = np.flatnonzero((freqs >= lo) & (freqs <= hi) & (freqs > 0))
    if idx.size == 0:
        raise InvalidInputError(f"no frequency bins inside band {band}")
    f = freqs[idx]
    denom = s_aa[idx] * s_bb[idx]
    with np.errstate(invalid="ignore", divide="ignore"):
        coh = np.where(denom > 0, np.abs(s_ab[idx]) ** 2 / denom, 0.0)
    phase = np.unwrap(-np.angle(s_ab[idx]))
    if f.size >= 2:
        intercept = np.polyfit(f, phase, 1)[1]
    else:
        intercept = phase[0]
    phase = phase - 2.0 * math.pi * round(intercept / (2.0 * math.pi))

    valid = (phase > 1e-12) & (coh >= coherence_gate)
    with np.errstate(invalid="ignore", divide="ignore"):
        vel = np.where(valid, 2.0 * math.pi * f * d / phase, np.nan)
    return PhaseVelocityCurve(f, phase, vel, coh, valid)


def shear_velocity_from_rayleigh(c_r: float, poisson: float) -> float:
    return c_r * (1.0 + poisson) / (0.87 + 1.12 * poisson)


def rayleigh_velocity(c_p: float, poisson: float) -> float:
    """Rayleigh velocity of an elastic half-space with P-wave speed ``c_p``."""
    c_s = c_p * math.sqrt((1.0 - 2.0 * poisson) / (2.0 * (1.0 - poisson)))
    return c_s * (0.87 + 1.12 * poisson) / (1.0 + poisson)


def usw_modulus(c_r: float, density: float = 2400.0, poisson: float = 0.2) -> float:
    """Young's modulus in Pa from a surface-wave velocity."""
    if not 0.0 < poisson < 0.5:
        raise InvalidInputError(f"Poisson ratio must lie in (0, 0.5), got {poisson}")
    if not density > 0:
        raise InvalidInputError("density must be positive")
    if not (math.isfinite(c_r) and c_r > 0):
        raise InvalidInputError(f"surface-wave velocity must be positive, got {c_r}")
    c_s = shear_velocity_from_rayleigh(c_r, poisson)
    return 2.0 * density * (1.0 + poisson) * c_s**2


def analyze_usw(
    sig_a,
    sig_b,
    d: float,
    bands: Sequence[tuple[float, float]] = ((15e3, 45e3),),
    density: float = 2400.0,
    poisson: float = 0.2,
    coherence_gate: float = 0.9,
) -> USWResult:
    curves = [usw_phase_velocity(sig_a, sig_b, d, b, coherence_gate) for b in bands]
    band_v = [c.mean_velocity for c in curves]
    finite = [v for v in band_v if math.isfinite(v)]
    if not finite:
        raise InvalidInputError("no coherent phase-velocity points in any band")
    mean_v = float(np.mean(finite))
    return USWResult(band_v, mean_v, usw_modulus(mean_v, density, poisson))
