"""Crack centre-line paths: extraction, endpoint linking, length, width and summary."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, dijkstra
from skimage.draw import line as draw_line
from skimage.measure import approximate_polygon
from skimage.morphology import skeletonize

from ..errors import InvalidInputError

_OFFSETS = [(0, 1), (1, -1), (1, 0), (1, 1)]  # half of the 8-neighbourhood


@dataclass(frozen=True)
class LinkingParams:
    window: int = 21
    max_link_distance: float = 15.0
    k_p: float = 1.0
    k_d: float = 0.5

    def __post_init__(self):
        if self.window <= 0:
            raise InvalidInputError("window must be positive")
        if self.k_p < 0 or self.k_d < 0:
            raise InvalidInputError("K_p and K_d must be nonnegative")
        if not 0 <= self.max_link_distance <= self.window * math.sqrt(2):
            raise InvalidInputError("max_link_distance must lie within the window diagonal")


@dataclass
class CrackPath:
    pixels: np.ndarray  # (n, 2) ordered (row, col), 8-connected
    scale: float = 1e-3
    mean_width_m: float = 0.0
    max_width_m: float = 0.0
    min_width_m: float = 0.0
    width_samples: list = field(default_factory=list)  # (row, col, width_m)

    @property
    def endpoints(self) -> tuple[tuple[int, int], tuple[int, int]]:
        """First and last pixel as (x, y) = (col, row)."""
        a, b = self.pixels[0], self.pixels[-1]
        return (int(a[1]), int(a[0])), (int(b[1]), int(b[0]))

    @property
    def length_px(self) -> float:
        return path_length_px(self.pixels)

    @property
    def length_m(self) -> float:
        return self.length_px * self.scale


def smooth_chain(p: np.ndarray, sigma: float) -> np.ndarray:
    """Gaussian-smooth an ordered chain with both ends pinned.

    Padding by point reflection about each end keeps straight runs straight
    and leaves the end points where they are.
    """
    p = np.asarray(p, dtype=float)
    n = len(p)
    pad = min(n - 1, int(4 * sigma + 0.5))
    if sigma <= 0 or pad < 1:
        return p
    head = 2 * p[0] - p[pad:0:-1]
    tail = 2 * p[-1] - p[-2 : -pad - 2 : -1]
    q = ndimage.gaussian_filter1d(np.concatenate([head, p, tail]), sigma, axis=0, mode="nearest")
    return q[pad : pad + n]


def path_length_px(pixels: np.ndarray, sigma: float = 1.5, tolerance: float = 1.0) -> float:
    """Centre-line length between the end pixel centres.

    Summing raw 8-connected steps overstates oblique lines, and skeleton
    chains carry small jogs; the chain is smoothed and simplified to a
    polyline before measuring.
    """
    p = np.asarray(pixels, dtype=float)
    if len(p) < 2:
        return 0.0
    poly = approximate_polygon(smooth_chain(p, sigma), tolerance=tolerance)
    return float(np.sum(np.hypot(*np.diff(poly, axis=0).T)))


def _skeleton_graph(skel: np.ndarray):
    rr, cc = np.nonzero(skel)
    idx = -np.ones(skel.shape, dtype=np.int64)
    idx[rr, cc] = np.arange(rr.size)
    rows, cols, w = [], [], []
    h, wd = skel.shape
    for dr, dc in _OFFSETS:
        r2, c2 = rr + dr, cc + dc
        ok = (r2 >= 0) & (r2 < h) & (c2 >= 0) & (c2 < wd)
        j = np.full(rr.size, -1)
        j[ok] = idx[r2[ok], c2[ok]]
        has = j >= 0
        rows.append(np.flatnonzero(has))
        cols.append(j[has])
        w.append(np.full(int(has.sum()), math.hypot(dr, dc)))
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    ww = np.concatenate(w)
    n = rr.size
    g = coo_matrix((np.concatenate([ww, ww]), (np.concatenate([r, c]), np.concatenate([c, r]))), shape=(n, n)).tocsr()
    return np.column_stack([rr, cc]), g


def skeleton_paths(mask: np.ndarray, scale: float = 1e-3) -> list[CrackPath]:
    """One path per skeleton component: its longest geodesic chain."""
    skel = skeletonize(np.asarray(mask, dtype=bool))
    if not skel.any():
        return []
    coords, g = _skeleton_graph(skel)
    n_comp, comp = connected_components(g, directed=False)
    paths = []
    for k in range(n_comp):
        nodes = np.flatnonzero(comp == k)
        if nodes.size == 1:
            paths.append(CrackPath(coords[nodes].copy(), scale))
            continue
        d0 = dijkstra(g, indices=nodes[0])
        a = nodes[np.argmax(d0[nodes])]
        da, pred = dijkstra(g, indices=a, return_predecessors=True)
        b = nodes[np.argmax(da[nodes])]
        chain = [b]
        while chain[-1] != a:
            chain.append(pred[chain[-1]])
        paths.append(CrackPath(coords[np.array(chain[::-1])], scale))
    # canonical order: by first pixel in raster order
    paths.sort(key=lambda p: (int(min(p.pixels[0][0], p.pixels[-1][0])), int(p.pixels[:, 1].min())))
    return paths


def link_cost(j_endpoint, i_endpoint, k_p: float, k_d: float) -> float:
    dx = i_endpoint[0] - j_endpoint[0]
    dy = i_endpoint[1] - j_endpoint[1]
    return k_p * math.sqrt(dx * dx + dy * dy) + k_d


def _best_candidate(paths: Sequence[CrackPath], j: int, params: LinkingParams):
    half = params.window // 2
    best = None
    for ej_side, ej in enumerate(paths[j].endpoints):
        for i, p in enumerate(paths):
            if i == j:
                continue
            for ei_side, ei in enumerate(p.endpoints):
                dx, dy = ei[0] - ej[0], ei[1] - ej[1]
                if abs(dx) > half or abs(dy) > half:
                    continue
                if math.hypot(dx, dy) > params.max_link_distance:
                    continue
                cost = link_cost(ej, ei, params.k_p, params.k_d)
                key = (cost, i, ej_side, ei_side)
                if best is None or key < best:
                    best = key
    return best


def bridge_pixels(a_xy, b_xy) -> np.ndarray:
    """Straight pixel run strictly between two (x, y) endpoints, as (row, col)."""
    rr, cc = draw_line(int(a_xy[1]), int(a_xy[0]), int(b_xy[1]), int(b_xy[0]))
    return np.column_stack([rr, cc])[1:-1]


def merge_paths(pj: CrackPath, pi: CrackPath, j_side: int, i_side: int) -> tuple[CrackPath, np.ndarray]:
    a = pj.pixels if j_side == 1 else pj.pixels[::-1]
    b = pi.pixels if i_side == 0 else pi.pixels[::-1]
    bridge = bridge_pixels((a[-1][1], a[-1][0]), (b[0][1], b[0][0]))
    merged = np.concatenate([a, bridge.reshape(-1, 2), b]).astype(int)
    return replace(pj, pixels=merged, width_samples=[]), bridge


def link_cracks(paths: Sequence[CrackPath], params: LinkingParams = LinkingParams()):
    """Greedily merge paths whose endpoints meet cheaply.

    Returns the merged paths and the bridge pixels that were drawn.
    """
    work = list(paths)
    bridges = []
    changed = True
    while changed:
        changed = False
        for j in range(len(work)):
            cand = _best_candidate(work, j, params)
            if cand is None:
                continue
            _, i, j_side, i_side = cand
            merged, bridge = merge_paths(work[j], work[i], j_side, i_side)
            bridges.append(bridge)
            lo, hi = min(i, j), max(i, j)
            work[lo] = merged
            del work[hi]
            changed = True
            break
    bridge_px = np.concatenate(bridges) if bridges else np.empty((0, 2), dtype=int)
    return work, bridge_px


def _run(mask: np.ndarray, r0: float, c0: float, dr: float, dc: float) -> int:
    h, w = mask.shape
    n = 0
    s = 1
    while True:
        r, c = int(round(r0 + s * dr)), int(round(c0 + s * dc))
        if not (0 <= r < h and 0 <= c < w) or not mask[r, c]:
            return n
        n += 1
        s += 1


def estimate_width(path: CrackPath, mask: np.ndarray, step: int = 5, span: int = 2) -> CrackPath:
    """Perpendicular run length of set pixels, sampled every ``step`` path pixels."""
    px = path.pixels
    samples = []
    for k in range(0, len(px), step):
        r, c = px[k]
        if not mask[r, c]:
            continue
        t = px[min(k + span, len(px) - 1)] - px[max(k - span, 0)]
        norm = math.hypot(*t)
        normals = [(-t[1] / norm, t[0] / norm)] if norm > 0 else [(1.0, 0.0), (0.0, 1.0)]
        run = min(1 + _run(mask, r, c, nr, nc) + _run(mask, r, c, -nr, -nc) for nr, nc in normals)
        samples.append((int(r), int(c), run * path.scale))
    if not samples:
        return replace(path, width_samples=[])
    w = np.array([s[2] for s in samples])
    return replace(path, mean_width_m=float(w.mean()), max_width_m=float(w.max()), min_width_m=float(w.min()), width_samples=samples)


def _image_frame(scale: float) -> Callable[[float, float], tuple[float, float]]:
    return lambda col, row: ((col + 0.5) * scale, (row + 0.5) * scale)


def crack_statistics(paths: Sequence[CrackPath], scale: float | None = None, to_frame=None) -> dict:
    """Total, longest and shortest length and widest and narrowest width with locations.

    ``to_frame`` maps pixel (col, row) to frame coordinates; by default the
    image frame in metres.
    """
    keys = ("total_length_m", "longest_m", "shortest_m", "max_width_m", "min_width_m")
    if not paths:
        out = {k: 0.0 for k in keys}
        out.update(count=0, empty=True, longest_xy=None, shortest_xy=None, max_width_xy=None, min_width_xy=None)
        return out
    scale = scale if scale is not None else paths[0].scale
    if not scale > 0:
        raise InvalidInputError("scale must be positive")
    to_frame = to_frame or _image_frame(scale)
    lengths = [p.length_px * scale for p in paths]

    def mid(p):
        r, c = p.pixels[len(p.pixels) // 2]
        return tuple(round(v, 6) for v in to_frame(float(c), float(r)))

    il = int(np.argmax(lengths))
    is_ = int(np.argmin(lengths))
    out = {
        "count": len(paths),
        "empty": False,
        "total_length_m": float(sum(lengths)),
        "longest_m": lengths[il],
        "longest_xy": mid(paths[il]),
        "shortest_m": lengths[is_],
        "shortest_xy": mid(paths[is_]),
    }
    samples = [(w, r, c) for p in paths for r, c, w in p.width_samples]
    if samples:
        wmax = max(samples, key=lambda s: s[0])
        wmin = min(samples, key=lambda s: s[0])
        out["max_width_m"] = wmax[0]
        out["max_width_xy"] = tuple(round(v, 6) for v in to_frame(float(wmax[2]), float(wmax[1])))
        out["min_width_m"] = wmin[0]
        out["min_width_xy"] = tuple(round(v, 6) for v in to_frame(float(wmin[2]), float(wmin[1])))
    else:
        out.update(max_width_m=0.0, max_width_xy=None, min_width_m=0.0, min_width_xy=None)
    return out
