"""Line-delimited station and result records.

A station record carries the estimated pose plus, in stop-move mode, the raw
IE, USW and ER payloads synthesized from a ground-truth slab. Sample arrays
are stored as base64 little-endian float32 to keep files compact.
"""

from __future__ import annotations

import base64
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidInputError
from .mission import NON_STOP, STOP_MOVE, Station
from .nde.impact_echo import IEBands, analyze_ie
from .nde.resistivity import analyze_er
from .nde.slab import NDEPhysics, SlabModel, synth_station_signals
from .nde.spectrum import TimeSignal
from .nde.surface_waves import analyze_usw

log = logging.getLogger(__name__)

SAMPLE_DTYPE = "<f4"
ANALYSIS_KINDS = ("ie", "usw", "er")


class MalformedRecordError(InvalidInputError):
    pass


def encode_samples(x: np.ndarray) -> str:
    return base64.b64encode(np.asarray(x, dtype=SAMPLE_DTYPE).tobytes()).decode("ascii")


def decode_samples(text: str) -> np.ndarray:
    raw = base64.b64decode(text.encode("ascii"), validate=True)
    if len(raw) % 4:
        raise MalformedRecordError("sample payload length is not a multiple of 4 bytes")
    return np.frombuffer(raw, dtype=SAMPLE_DTYPE).astype(float)


def tile_id(station_index: int) -> str:
    return f"tile_{station_index:05d}"


def station_measurements(
    stations: Sequence[Station],
    slab: SlabModel,
    mode: str = STOP_MOVE,
    physics: NDEPhysics = NDEPhysics(),
    seed: int = 0,
    edge_tolerance: float = 0.1,
) -> list[dict]:
    """Bind synthetic sensor readings to captured stations.

    Signals are synthesized at the true robot position and stamped with the
    estimated pose; true positions up to ``edge_tolerance`` past the slab
    edge (a robot inside the capture radius of an edge station) read the edge
    cell. Each station draws from its own generator seeded by
    ``(seed, index)`` so records do not depend on processing order.
    """
    if mode not in (STOP_MOVE, NON_STOP):
        raise InvalidInputError(f"unknown mode {mode!r}")
    out = []
    for st in stations:
        rec = {
            "station": st.index,
            "scan_line": st.scan_line,
            "timestamp": round(st.timestamp, 6),
            "mode": mode,
            "pose": {"x": st.pose.x, "y": st.pose.y, "heading": st.pose.heading},
            "image_tile": tile_id(st.index),
        }
        # raises OutOfBoundsError for stations off the slab
        slab.cell_index(st.true_pose.x, st.true_pose.y, edge_tolerance)
        if mode == STOP_MOVE:
            rng = np.random.default_rng([seed, st.index])
            sig = synth_station_signals(slab, st.true_pose.x, st.true_pose.y, physics, rng, edge_tolerance)
            fs = physics.sample_rate
            rec["ie"] = {"sample_rate": fs, "dtype": SAMPLE_DTYPE, "channels": [encode_samples(s.samples) for s in sig.ie]}
            rec["usw"] = {
                "sample_rate": fs,
                "dtype": SAMPLE_DTYPE,
                "spacing_m": sig.usw_spacing,
                "a": [encode_samples(s.samples) for s in sig.usw_a],
                "b": [encode_samples(s.samples) for s in sig.usw_b],
            }
            rec["er"] = {"voltage_v": sig.er_voltage, "current_a": sig.er_current, "spacing_m": sig.er_spacing}
        out.append(rec)
    return out


def write_jsonl(records: Iterable[dict], path: str | Path) -> None:
    with open(path, "w", newline="\n") as fh:
        for r in records:
            fh.write(json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n")


def read_jsonl(path: str | Path) -> tuple[list[dict], int]:
    """Parsed records and the count of lines that were not JSON objects."""
    good, bad = [], 0
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError:
                bad += 1
                continue
            if isinstance(obj, dict):
                good.append(obj)
            else:
                bad += 1
    return good, bad


@dataclass(frozen=True)
class AnalysisSettings:
    physics: NDEPhysics = NDEPhysics()
    ie_bands: IEBands = IEBands()
    coherence_gate: float = 0.9


def _signals(payload: dict, key: str) -> list[TimeSignal]:
    if payload.get("dtype", SAMPLE_DTYPE) != SAMPLE_DTYPE:
        raise MalformedRecordError(f"unsupported sample dtype {payload.get('dtype')!r}")
    fs = float(payload["sample_rate"])
    return [TimeSignal(fs, decode_samples(s), f"{key}{k}") for k, s in enumerate(payload[key])]


def _analyze_kind(rec: dict, kind: str, settings: AnalysisSettings) -> dict:
    ph = settings.physics
    if kind == "ie":
        sigs = _signals(rec["ie"], "channels")
        r = analyze_ie(sigs, thickness=ph.thickness, c_p=ph.c_p, beta1=ph.beta1, bands=settings.ie_bands)
        return {
            "f_ie_hz": r.f_ie,
            "f_dominant_hz": r.f_dominant,
            "depth_m": r.depth_h,
            "condition": r.condition,
            "severity": r.severity,
        }
    if kind == "usw":
        p = rec["usw"]
        a, b = _signals(p, "a"), _signals(p, "b")
        r = analyze_usw(a, b, float(p["spacing_m"]), (ph.usw_band,), ph.density, ph.poisson, settings.coherence_gate)
        return {"velocity_mps": r.mean_velocity, "modulus_gpa": r.modulus_gpa, "modulus_ksi": r.modulus_ksi}
    if kind == "er":
        p = rec["er"]
        r = analyze_er(float(p["voltage_v"]), float(p["current_a"]), float(p["spacing_m"]))
        return {"resistivity_ohm_m": r.resistivity, "flagged": r.flagged}
    raise InvalidInputError(f"unknown analysis kind {kind!r}")


@dataclass
class AnalysisOutcome:
    result: dict | None
    warnings: list[str] = field(default_factory=list)
    malformed: bool = False


def analyze_record(rec: dict, kinds: Sequence[str], settings: AnalysisSettings = AnalysisSettings()) -> AnalysisOutcome:
    try:
        idx = int(rec["station"])
        x, y = float(rec["pose"]["x"]), float(rec["pose"]["y"])
    except (KeyError, TypeError, ValueError):
        return AnalysisOutcome(None, ["record lacks station index or pose"], malformed=True)
    if not (math.isfinite(x) and math.isfinite(y)):
        return AnalysisOutcome(None, [f"station {idx}: non-finite pose"], malformed=True)
    res = {"station": idx, "x": x, "y": y}
    warnings = []
    for kind in kinds:
        if kind not in rec:
            warnings.append(f"station {idx}: no {kind} payload, skipped")
            continue
        try:
            res[kind] = _analyze_kind(rec, kind, settings)
        except (KeyError, TypeError, ValueError) as exc:
            warnings.append(f"station {idx}: {kind} analysis failed: {exc}")
    return AnalysisOutcome(res, warnings)


def map_records(results: Iterable[dict], kind: str) -> list[tuple[float, float, float]]:
    """(x, y, value) triples feeding a condition map of ``kind``."""
    key = {"delamination": ("ie", "severity"), "modulus": ("usw", "modulus_gpa"), "resistivity": ("er", "resistivity_ohm_m")}
    if kind not in key:
        raise InvalidInputError(f"unknown map kind {kind!r}")
    section, field_name = key[kind]
    out = []
    for r in results:
        sub = r.get(section)
        if sub is None or sub.get(field_name) is None:
            continue
        v = float(sub[field_name])
        if math.isfinite(v):
            out.append((float(r["x"]), float(r["y"]), v))
    return out
