"""Sampled waveforms and their one-sided amplitude spectra."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidInputError

MIN_SAMPLES = 64


@dataclass
class TimeSignal:
    sample_rate: float
    samples: np.ndarray
    channel: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if not self.sample_rate > 0:
            raise InvalidInputError("sample_rate must be positive")
        if self.samples.ndim != 1 or self.samples.size < MIN_SAMPLES:
            raise InvalidInputError(f"signal needs at least {MIN_SAMPLES} samples, got {self.samples.size}")
        if not np.all(np.isfinite(self.samples)):
            raise InvalidInputError("signal contains non-finite samples")

    @property
    def n(self) -> int:
        return self.samples.size

    def to_dict(self) -> dict:
        return {"sample_rate": self.sample_rate, "channel": self.channel, "samples": [float(v) for v in self.samples]}

    @classmethod
    def from_dict(cls, d: dict) -> "TimeSignal":
        return cls(float(d["sample_rate"]), np.asarray(d["samples"], dtype=float), d.get("channel", ""))


@dataclass
class AmplitudeSpectrum:
    freqs: np.ndarray
    magnitudes: np.ndarray
    n_samples: int
    nfft: int
    window: str = "none"
    is_average: bool = field(default=False)

    @property
    def df(self) -> float:
        return float(self.freqs[1] - self.freqs[0])

    def energy(self) -> float:
        """Time-domain energy implied by the one-sided spectrum (Parseval)."""
        m2 = self.magnitudes**2
        total = m2[0] + 2.0 * m2[1:].sum()
        if self.nfft % 2 == 0:
            total -= m2[-1]
        return float(total / self.nfft)


def _window(name: str, n: int) -> np.ndarray:
    if name == "none":
        return np.ones(n)
    if name == "hann":
        return np.hanning(n)
    raise InvalidInputError(f"unknown window {name!r}")


def amplitude_spectrum(sig: TimeSignal, window: str = "hann", nfft: int | None = None) -> AmplitudeSpectrum:
    """Magnitude of the real FFT of the (optionally windowed, zero-padded) signal."""
    if sig.n < MIN_SAMPLES:
        raise InvalidInputError(f"signal too short: {sig.n} < {MIN_SAMPLES}")
    nfft = sig.n if nfft is None else int(nfft)
    if nfft < sig.n:
        raise InvalidInputError("nfft must be at least the signal length")
    x = sig.samples * _window(window, sig.n)
    mags = np.abs(np.fft.rfft(x, nfft))
    freqs = np.fft.rfftfreq(nfft, 1.0 / sig.sample_rate)
    return AmplitudeSpectrum(freqs, mags, sig.n, nfft, window)


def average_spectra(spectra: list[AmplitudeSpectrum]) -> AmplitudeSpectrum:
    if not spectra:
        raise InvalidInputError("no spectra to average")
    first = spectra[0]
    for s in spectra[1:]:
        if s.nfft != first.nfft or not np.allclose(s.freqs, first.freqs):
            raise InvalidInputError("spectra have different frequency grids")
    mags = np.mean([s.magnitudes for s in spectra], axis=0)
    return AmplitudeSpectrum(first.freqs, mags, first.n_samples, first.nfft, first.window, True)


def dominant_frequency(spec: AmplitudeSpectrum, band: tuple[float, float] | None = None) -> float:
    """Peak frequency inside ``band``, refined by a 3-bin parabola."""
    mags = spec.magnitudes
    if band is None:
        idx = np.arange(1, mags.size)
    else:
        lo, hi = band
        idx = np.flatnonzero((spec.freqs >= lo) & (spec.freqs <= hi))
    if idx.size == 0:
        raise InvalidInputError(f"no spectral bins inside band {band}")
    k = int(idx[np.argmax(mags[idx])])
    offset = 0.0
    if 0 < k < mags.size - 1:
        a, b, c = mags[k - 1], mags[k], mags[k + 1]
        denom = a - 2.0 * b + c
        if denom < 0.0:
            offset = 0.5 * (a - c) / denom
    return float((k + offset) * spec.df)
