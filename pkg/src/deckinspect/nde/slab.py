"""Synthetic ground-truth slabs and the sensor signals they would produce.

A :class:`SlabModel` is a plan-view raster of the deck. Each cell carries its
thickness, the depth of a delamination (0 for none), a modulus multiplier and
a corrosion flag. :func:`synth_station_signals` turns one cell into impact-echo
channels, surface-wave receiver pairs and a Wenner reading.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from ..errors import InvalidInputError, OutOfBoundsError
from .resistivity import wenner_voltage
from .spectrum import TimeSignal
from .surface_waves import rayleigh_velocity

# shallow, intermediate and deep artificial delaminations of the validation slab
DELAMINATION_DEPTHS = (0.05, 0.10, 0.17)


@dataclass(frozen=True)
class NDEPhysics:
    c_p: float = 4000.0
    density: float = 2400.0
    poisson: float = 0.2
    beta1: float = 0.95
    thickness: float = 0.2
    sample_rate: float = 500e3
    ie_samples: int = 2048
    ie_channels: int = 2
    ie_decay_s: float = 0.6e-3
    flexural_ratio: float = 0.25
    flexural_amplitude: float = 3.0
    shallow_max_depth: float = 0.075
    snr_db: float = 20.0
    usw_samples: int = 512
    usw_records: int = 3
    usw_spacing: float = 0.1
    usw_center_hz: float = 30e3
    usw_onset_s: float = 0.2e-3
    usw_band: tuple[float, float] = (15e3, 45e3)
    er_spacing: float = 0.05
    er_current: float = 1e-3
    rho_sound: float = 400.0
    rho_corroded: float = 80.0
    corrosion_velocity_factor: float = 0.97

    def __post_init__(self):
        for name in ("c_p", "density", "beta1", "thickness", "sample_rate", "usw_spacing", "er_spacing", "er_current"):
            if not getattr(self, name) > 0:
                raise InvalidInputError(f"{name} must be positive")
        if not 0.0 < self.poisson < 0.5:
            raise InvalidInputError("poisson must lie in (0, 0.5)")
        object.__setattr__(self, "usw_band", tuple(float(v) for v in self.usw_band))

    @property
    def f_full(self) -> float:
        return self.beta1 * self.c_p / self.thickness

    @property
    def rayleigh_velocity(self) -> float:
        return rayleigh_velocity(self.c_p, self.poisson)


@dataclass
class SlabModel:
    origin: tuple[float, float]
    cell_size: float
    thickness: np.ndarray
    delamination: np.ndarray
    modulus_multiplier: np.ndarray
    corrosion: np.ndarray
    defects: list[dict] = field(default_factory=list)

    def __post_init__(self):
        self.thickness = np.asarray(self.thickness, dtype=float)
        self.delamination = np.asarray(self.delamination, dtype=float)
        self.modulus_multiplier = np.asarray(self.modulus_multiplier, dtype=float)
        self.corrosion = np.asarray(self.corrosion, dtype=bool)
        shapes = {a.shape for a in (self.thickness, self.delamination, self.modulus_multiplier, self.corrosion)}
        if len(shapes) != 1 or self.thickness.ndim != 2:
            raise InvalidInputError("slab layers must be 2-D arrays of one shape")
        allowed = (0.0,) + DELAMINATION_DEPTHS
        if not np.all(np.isin(np.round(self.delamination, 6), allowed)):
            raise InvalidInputError(f"delamination depths must be one of {allowed}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.thickness.shape

    @property
    def extent(self) -> tuple[float, float, float, float]:
        ny, nx = self.shape
        x0, y0 = self.origin
        return (x0, y0, x0 + nx * self.cell_size, y0 + ny * self.cell_size)

    def cell_index(self, x: float, y: float, tolerance: float = 0.0) -> tuple[int, int]:
        """Cell holding (x, y); points up to ``tolerance`` outside snap to the edge cell."""
        x0, y0, x1, y1 = self.extent
        t = tolerance
        if not (x0 - t <= x <= x1 + t and y0 - t <= y <= y1 + t):
            raise OutOfBoundsError(f"({x:.3f}, {y:.3f}) outside slab extent {self.extent}")
        ny, nx = self.shape
        i = min(max(int(math.floor((y - y0) / self.cell_size)), 0), ny - 1)
        j = min(max(int(math.floor((x - x0) / self.cell_size)), 0), nx - 1)
        return i, j

    def cell(self, x: float, y: float, tolerance: float = 0.0) -> dict:
        i, j = self.cell_index(x, y, tolerance)
        return {
            "thickness": float(self.thickness[i, j]),
            "delamination": float(self.delamination[i, j]),
            "modulus_multiplier": float(self.modulus_multiplier[i, j]),
            "corrosion": bool(self.corrosion[i, j]),
        }

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        ny, nx = self.shape
        xs = self.origin[0] + (np.arange(nx) + 0.5) * self.cell_size
        ys = self.origin[1] + (np.arange(ny) + 0.5) * self.cell_size
        return np.meshgrid(xs, ys)

    def to_dict(self) -> dict:
        return {
            "origin": list(self.origin),
            "cell_size": self.cell_size,
            "thickness": self.thickness.tolist(),
            "delamination": self.delamination.tolist(),
            "modulus_multiplier": self.modulus_multiplier.tolist(),
            "corrosion": self.corrosion.astype(int).tolist(),
            "defects": self.defects,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SlabModel":
        return cls(
            tuple(d["origin"]),
            float(d["cell_size"]),
            np.asarray(d["thickness"]),
            np.asarray(d["delamination"]),
            np.asarray(d["modulus_multiplier"]),
            np.asarray(d["corrosion"]).astype(bool),
            list(d.get("defects", [])),
        )


def uniform_slab(length: float, width: float, thickness: float = 0.2, cell_size: float = 0.1) -> SlabModel:
    nx = max(1, int(math.ceil(length / cell_size - 1e-9)))
    ny = max(1, int(math.ceil(width / cell_size - 1e-9)))
    return SlabModel(
        (0.0, 0.0),
        cell_size,
        np.full((ny, nx), thickness),
        np.zeros((ny, nx)),
        np.ones((ny, nx)),
        np.zeros((ny, nx), dtype=bool),
    )


def add_defect(slab: SlabModel, kind: str, x0: float, y0: float, x1: float, y1: float, value=None) -> None:
    """Paint a rectangular defect onto the slab in place.

    ``kind`` is ``delamination`` (value = depth), ``modulus`` (value =
    multiplier) or ``corrosion``.
    """
    xs, ys = slab.cell_centers()
    inside = (xs >= x0) & (xs <= x1) & (ys >= y0) & (ys <= y1)
    if kind == "delamination":
        if value not in DELAMINATION_DEPTHS:
            raise InvalidInputError(f"delamination depth must be one of {DELAMINATION_DEPTHS}")
        slab.delamination[inside] = value
    elif kind == "modulus":
        if not (value and value > 0):
            raise InvalidInputError("modulus multiplier must be positive")
        slab.modulus_multiplier[inside] = value
    elif kind == "corrosion":
        slab.corrosion[inside] = True
    else:
        raise InvalidInputError(f"unknown defect kind {kind!r}")
    slab.defects.append({"kind": kind, "rect": [x0, y0, x1, y1], "value": value})


def validation_slab(cell_size: float = 0.1) -> SlabModel:
    """A 6.1 m x 3.7 m slab patterned after a laboratory validation deck.

    It holds one delamination at each of the three depths, a reduced-modulus
    block, a corrosion strip over about a quarter of the area, and one small
    shallow delamination narrower than the 2 ft survey lattice.
    """
    slab = uniform_slab(6.1, 3.7, 0.2, cell_size)
    add_defect(slab, "delamination", 0.6, 0.6, 1.85, 1.85, 0.05)
    add_defect(slab, "delamination", 2.45, 0.6, 3.7, 1.85, 0.10)
    add_defect(slab, "delamination", 4.3, 0.6, 5.55, 1.85, 0.17)
    add_defect(slab, "modulus", 0.6, 2.45, 1.85, 3.1, 0.5)
    add_defect(slab, "corrosion", 2.45, 2.45, 6.1, 3.7)
    add_defect(slab, "delamination", 2.0, 2.15, 2.2, 2.35, 0.05)
    return slab


def random_deck_slab(
    length: float, width: float, seed: int = 0, n_defects: int = 6, cell_size: float = 0.1, thickness: float = 0.2
) -> SlabModel:
    """Deck-sized ground truth with a few seeded rectangular defects."""
    rng = np.random.default_rng(seed)
    slab = uniform_slab(length, width, thickness, cell_size)
    kinds = ["delamination", "delamination", "delamination", "modulus", "corrosion"]
    for _ in range(n_defects):
        kind = kinds[int(rng.integers(len(kinds)))]
        w = float(rng.uniform(1.0, 4.0))
        h = float(rng.uniform(1.0, min(2.5, width)))
        x0 = float(rng.uniform(0.0, max(length - w, 0.0)))
        y0 = float(rng.uniform(0.0, max(width - h, 0.0)))
        value = None
        if kind == "delamination":
            value = DELAMINATION_DEPTHS[int(rng.integers(3))]
        elif kind == "modulus":
            value = 0.5
        add_defect(slab, kind, round(x0, 3), round(y0, 3), round(x0 + w, 3), round(y0 + h, 3), value)
    return slab


def lattice_positions(slab: SlabModel, spacing: float = 0.6096) -> list[tuple[float, float]]:
    """Station positions on a square lattice, offset half a spacing from the edge."""
    x0, y0, x1, y1 = slab.extent
    xs = np.arange(x0 + spacing / 2, x1, spacing)
    ys = np.arange(y0 + spacing / 2, y1, spacing)
    return [(float(x), float(y)) for y in ys for x in xs]


@dataclass
class StationSignals:
    ie: list[TimeSignal]
    usw_a: list[TimeSignal]
    usw_b: list[TimeSignal]
    er_voltage: float
    er_current: float
    er_spacing: float
    usw_spacing: float


def _noise_sigma(clean: np.ndarray, snr_db: float) -> float:
    rms = float(np.sqrt(np.mean(clean**2)))
    return rms / (10.0 ** (snr_db / 20.0))


def ie_waveform(freqs_amps: list[tuple[float, float]], physics: NDEPhysics) -> np.ndarray:
    t = np.arange(physics.ie_samples) / physics.sample_rate
    env = np.exp(-t / physics.ie_decay_s)
    out = np.zeros_like(t)
    for f, a in freqs_amps:
        out += a * np.sin(2.0 * math.pi * f * t) * env
    return out


def ricker(n: int, fs: float, f_c: float, onset: float) -> np.ndarray:
    t = np.arange(n) / fs - onset
    arg = (math.pi * f_c * t) ** 2
    return (1.0 - 2.0 * arg) * np.exp(-arg)


def fractional_delay(x: np.ndarray, delay_s: float, fs: float) -> np.ndarray:
    """Delay by an arbitrary time via a linear phase ramp (circular)."""
    n = x.size
    f = np.fft.rfftfreq(n, 1.0 / fs)
    return np.fft.irfft(np.fft.rfft(x) * np.exp(-2j * math.pi * f * delay_s), n)


def cell_wave_speeds(cell: dict, physics: NDEPhysics) -> tuple[float, float]:
    """(P-wave, Rayleigh) speeds in a cell; both scale with sqrt(modulus)."""
    factor = math.sqrt(cell["modulus_multiplier"])
    if cell["corrosion"]:
        factor *= physics.corrosion_velocity_factor
    return physics.c_p * factor, physics.rayleigh_velocity * factor


def ie_modes(cell: dict, physics: NDEPhysics) -> list[tuple[float, float]]:
    c_p, _ = cell_wave_speeds(cell, physics)
    depth = cell["delamination"] if cell["delamination"] > 0 else cell["thickness"]
    modes = [(physics.beta1 * c_p / depth, 1.0)]
    if 0 < cell["delamination"] <= physics.shallow_max_depth:
        f_full = physics.beta1 * c_p / cell["thickness"]
        modes.append((physics.flexural_ratio * f_full, physics.flexural_amplitude))
    return modes


def synth_station_signals(
    slab: SlabModel, x: float, y: float, physics: NDEPhysics = NDEPhysics(), rng=None, tolerance: float = 0.0
) -> StationSignals:
    """Synthesize every contact-sensor reading at deck position (x, y)."""
    cell = slab.cell(x, y, tolerance)
    rng = np.random.default_rng() if rng is None else rng
    fs = physics.sample_rate

    clean_ie = ie_waveform(ie_modes(cell, physics), physics)
    sigma = _noise_sigma(clean_ie, physics.snr_db)
    ie = [
        TimeSignal(fs, clean_ie + sigma * rng.standard_normal(clean_ie.size), f"ie{k}")
        for k in range(physics.ie_channels)
    ]

    _, c_r = cell_wave_speeds(cell, physics)
    pulse = ricker(physics.usw_samples, fs, physics.usw_center_hz, physics.usw_onset_s)
    delayed = fractional_delay(pulse, physics.usw_spacing / c_r, fs)
    sigma_u = _noise_sigma(pulse, physics.snr_db)
    usw_a, usw_b = [], []
    for k in range(physics.usw_records):
        usw_a.append(TimeSignal(fs, pulse + sigma_u * rng.standard_normal(pulse.size), f"usw{k}a"))
        usw_b.append(TimeSignal(fs, delayed + sigma_u * rng.standard_normal(pulse.size), f"usw{k}b"))

    rho = physics.rho_corroded if cell["corrosion"] else physics.rho_sound
    volts = wenner_voltage(rho, physics.er_current, physics.er_spacing)
    return StationSignals(ie, usw_a, usw_b, volts, physics.er_current, physics.er_spacing, physics.usw_spacing)


def physics_to_dict(physics: NDEPhysics) -> dict:
    d = asdict(physics)
    d["usw_band"] = list(physics.usw_band)
    return d
