"""Georeferenced condition grids and their hot/cold rasters."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from ..errors import EmptyMapError, InvalidInputError

STATUS_NODATA, STATUS_MEASURED, STATUS_FILLED = 0, 1, 2
STATUS_NAMES = {STATUS_NODATA: "nodata", STATUS_MEASURED: "measured", STATUS_FILLED: "filled"}


@dataclass(frozen=True)
class ClassBands:
    """Ordered thresholds; class 0 is the best condition."""

    edges: tuple[float, ...]
    labels: tuple[str, ...]
    lower_is_worse: bool
    aggregate: str = "mean"

    def __post_init__(self):
        if len(self.labels) != len(self.edges) + 1:
            raise InvalidInputError("need one more label than edges")
        if list(self.edges) != sorted(self.edges):
            raise InvalidInputError("class edges must be ascending")

    def classify(self, value: float) -> int:
        if self.lower_is_worse:
            return sum(1 for e in self.edges if e > value)
        return sum(1 for e in self.edges if e <= value)


# severity index 0..3 produced by the impact-echo grading
DELAMINATION_BANDS = ClassBands((0.5, 1.5, 2.5), ("good", "fair", "poor", "serious"), False, "max")
# modulus in GPa; 13.8 GPa = 2000 ksi, 27.6 GPa = 4000 ksi
MODULUS_BANDS = ClassBands((13.8, 20.7, 27.6), ("good", "fair", "poor", "serious"), True)
# resistivity in ohm-m, labelled by corrosion risk
RESISTIVITY_BANDS = ClassBands((120.0, 240.0), ("low", "moderate", "high"), True)

DEFAULT_BANDS = {
    "delamination": DELAMINATION_BANDS,
    "modulus": MODULUS_BANDS,
    "resistivity": RESISTIVITY_BANDS,
}


@dataclass
class ConditionGrid:
    kind: str
    origin: tuple[float, float]
    cell_size: float
    values: np.ndarray
    classes: np.ndarray
    status: np.ndarray
    bands: ClassBands

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def cell_center(self, i: int, j: int) -> tuple[float, float]:
        return (self.origin[0] + (j + 0.5) * self.cell_size, self.origin[1] + (i + 0.5) * self.cell_size)

    def cell_index(self, x: float, y: float) -> tuple[int, int]:
        ny, nx = self.shape
        j = int(math.floor((x - self.origin[0]) / self.cell_size))
        i = int(math.floor((y - self.origin[1]) / self.cell_size))
        return min(max(i, 0), ny - 1), min(max(j, 0), nx - 1)

    def label(self, i: int, j: int) -> str:
        if self.status[i, j] == STATUS_NODATA:
            return "nodata"
        return self.bands.labels[int(self.classes[i, j])]

    def rows(self) -> Iterable[tuple]:
        ny, nx = self.shape
        for i in range(ny):
            for j in range(nx):
                x, y = self.cell_center(i, j)
                v = self.values[i, j]
                yield (x, y, None if np.isnan(v) else float(v), self.label(i, j), STATUS_NAMES[int(self.status[i, j])])

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x_m", "y_m", "value", "class", "status"])
            for x, y, v, label, status in self.rows():
                w.writerow([f"{x:.4f}", f"{y:.4f}", "" if v is None else f"{v:.6g}", label, status])

    def class_fractions(self) -> dict[str, float]:
        populated = self.status != STATUS_NODATA
        total = int(populated.sum())
        return {
            lab: (float(((self.classes == k) & populated).sum()) / total if total else 0.0)
            for k, lab in enumerate(self.bands.labels)
        }


def grid_condition_map(
    records: Sequence[tuple[float, float, float]],
    kind: str,
    cell_size: float = 0.6096,
    extent: tuple[float, float, float, float] | None = None,
    max_gap: float = 1.0,
    power: float = 2.0,
    bands: ClassBands | None = None,
) -> ConditionGrid:
    """Bin ``(x, y, value)`` records into a grid and grade each cell.

    Several records in one cell are aggregated (mean, or worst case for the
    delamination severity). Empty cells whose centre lies within ``max_gap``
    of a populated cell centre are filled by inverse-distance weighting of
    those populated cells; farther cells stay no-data.
    """
    if not records:
        raise EmptyMapError(f"no records for {kind} map")
    if not cell_size > 0:
        raise InvalidInputError("cell_size must be positive")
    bands = bands or DEFAULT_BANDS.get(kind)
    if bands is None:
        raise InvalidInputError(f"unknown map kind {kind!r}")
    pts = np.array([(float(r[0]), float(r[1])) for r in records])
    vals = np.array([float(r[2]) for r in records])
    if not np.all(np.isfinite(vals)):
        raise InvalidInputError("record values must be finite")

    if extent is None:
        x0, y0 = pts.min(axis=0)
        x1, y1 = pts.max(axis=0)
    else:
        x0, y0, x1, y1 = extent
    nx = max(1, int(math.ceil((x1 - x0) / cell_size - 1e-9)))
    ny = max(1, int(math.ceil((y1 - y0) / cell_size - 1e-9)))

    j = np.clip(np.floor((pts[:, 0] - x0) / cell_size).astype(int), 0, nx - 1)
    i = np.clip(np.floor((pts[:, 1] - y0) / cell_size).astype(int), 0, ny - 1)
    values = np.full((ny, nx), np.nan)
    status = np.zeros((ny, nx), dtype=int)
    flat = i * nx + j
    # order-independent aggregation
    for cell in np.unique(flat):
        members = vals[flat == cell]
        ci, cj = divmod(int(cell), nx)
        values[ci, cj] = members.max() if bands.aggregate == "max" else members.mean()
        status[ci, cj] = STATUS_MEASURED

    measured = np.argwhere(status == STATUS_MEASURED)
    centers = np.column_stack(
        [x0 + (measured[:, 1] + 0.5) * cell_size, y0 + (measured[:, 0] + 0.5) * cell_size]
    )
    known = values[measured[:, 0], measured[:, 1]]
    tree = cKDTree(centers)
    for ci, cj in np.argwhere(status == STATUS_NODATA):
        c = (x0 + (cj + 0.5) * cell_size, y0 + (ci + 0.5) * cell_size)
        near = sorted(tree.query_ball_point(c, max_gap + 1e-9))
        if not near:
            continue
        d = np.hypot(centers[near, 0] - c[0], centers[near, 1] - c[1])
        w = 1.0 / d**power
        values[ci, cj] = float(np.sum(w * known[near]) / np.sum(w))
        status[ci, cj] = STATUS_FILLED

    classes = np.full((ny, nx), -1, dtype=int)
    for ci, cj in np.argwhere(status != STATUS_NODATA):
        classes[ci, cj] = bands.classify(values[ci, cj])
    return ConditionGrid(kind, (float(x0), float(y0)), cell_size, values, classes, status, bands)


_PALETTE_4 = [(30, 80, 200), (40, 170, 70), (240, 200, 0), (220, 30, 30)]
_PALETTE_3 = [(30, 80, 200), (240, 200, 0), (220, 30, 30)]
_NODATA_RGB = (200, 200, 200)


def class_colors(n_classes: int) -> list[tuple[int, int, int]]:
    """Cold (blue/green) for good through hot (yellow/red) for serious."""
    if n_classes == 4:
        return _PALETTE_4
    if n_classes == 3:
        return _PALETTE_3
    ramp = np.linspace(0.0, 1.0, n_classes)
    return [(int(220 * t + 30 * (1 - t)), int(80 * (1 - t)), int(200 * (1 - t) + 30 * t)) for t in ramp]


def render_heatmap(grid: ConditionGrid, pixels_per_cell: int = 8) -> np.ndarray:
    """RGB raster with north (max y) on top."""
    ny, nx = grid.shape
    colors = np.array(class_colors(len(grid.bands.labels)), dtype=np.uint8)
    img = np.empty((ny, nx, 3), dtype=np.uint8)
    img[:] = _NODATA_RGB
    populated = grid.status != STATUS_NODATA
    img[populated] = colors[grid.classes[populated]]
    img = img[::-1]
    return np.kron(img, np.ones((pixels_per_cell, pixels_per_cell, 1), dtype=np.uint8))


def write_heatmap(grid: ConditionGrid, path: str | Path, pixels_per_cell: int = 8) -> None:
    from PIL import Image

    Image.fromarray(render_heatmap(grid, pixels_per_cell), mode="RGB").save(path, format="PNG")
