"""Four-electrode Wenner resistivity."""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..errors import InvalidInputError


@dataclass
class ERResult:
    resistivity: float
    spacing: float
    voltage: float
    current: float

    @property
    def flagged(self) -> bool:
        return not self.resistivity > 0


def er_resistivity(voltage: float, current: float, spacing: float) -> float:
    """Apparent resistivity ``2*pi*a*V/I`` in ohm-metres."""
    for v in (voltage, current, spacing):
        if not math.isfinite(v):
            raise InvalidInputError(f"non-finite reading {v!r}")
    if current == 0.0:
        raise InvalidInputError("zero injected current")
    if spacing <= 0.0:
        raise InvalidInputError("electrode spacing must be positive")
    return 2.0 * math.pi * spacing * voltage / current


def analyze_er(voltage: float, current: float, spacing: float) -> ERResult:
    return ERResult(er_resistivity(voltage, current, spacing), spacing, voltage, current)


def wenner_voltage(resistivity: float, current: float, spacing: float) -> float:
    """Inner-electrode potential difference a probe would read over ``resistivity``."""
    return resistivity * current / (2.0 * math.pi * spacing)
