"""Layered survey configuration: packaged defaults, a user file, then CLI overrides."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import yaml

from .crack.corpus import CorpusParams
from .crack.georef import CameraFootprint
from .crack.paths import LinkingParams
from .crack.pipeline import CrackParams, DenoiseParams
from .errors import ConfigError, DeckInspectError
from .mission import DeckSpec, GainPolicy, MissionPlan, NoiseModel, plan_lawnmower
from .navigation import ControllerParams
from .nde.impact_echo import IEBands
from .nde.mapping import DEFAULT_BANDS, ClassBands
from .nde.slab import NDEPhysics
from .records import AnalysisSettings


def load_defaults() -> dict:
    text = resources.files("deckinspect").joinpath("defaults.yaml").read_text()
    return yaml.safe_load(text)


def _check_type(default: Any, value: Any, where: str) -> Any:
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(where, f"expected true/false, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(where, f"expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(where, f"expected a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        # tau accepts either its keyword or a number
        if isinstance(value, (int, float)) and not isinstance(value, bool) and where == "crack.tau":
            return float(value)
        if not isinstance(value, str):
            raise ConfigError(where, f"expected a string, got {value!r}")
        return value
    if isinstance(default, list):
        if not isinstance(value, list) or len(value) != len(default):
            raise ConfigError(where, f"expected a list of {len(default)} values, got {value!r}")
        return [_check_type(d, v, f"{where}[{k}]") for k, (d, v) in enumerate(zip(default, value))]
    return value


def merge(base: dict, override: Mapping, prefix: str = "") -> dict:
    """Deep-merge ``override`` into a copy of ``base``, rejecting unknown keys."""
    out = copy.deepcopy(base)
    if not isinstance(override, Mapping):
        raise ConfigError(prefix or "<root>", "expected a mapping")
    for key, value in override.items():
        where = f"{prefix}.{key}" if prefix else str(key)
        if key not in out:
            raise ConfigError(where, "unknown key")
        if isinstance(out[key], dict):
            out[key] = merge(out[key], value, where)
        else:
            out[key] = _check_type(out[key], value, where)
    return out


def parse_override(item: str) -> dict:
    """``section.key=value`` with a YAML-typed value, as a nested mapping."""
    if "=" not in item:
        raise ConfigError(item, "override must look like section.key=value")
    path, raw = item.split("=", 1)
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(path, f"unparseable value {raw!r}") from exc
    node: dict = {}
    cur = node
    keys = path.strip().split(".")
    for k in keys[:-1]:
        cur[k] = {}
        cur = cur[k]
    cur[keys[-1]] = value
    return node


@dataclass(frozen=True)
class SurveyConfig:
    data: dict

    @classmethod
    def from_sources(cls, path: str | Path | None = None, overrides: list[Mapping] | None = None) -> "SurveyConfig":
        data = load_defaults()
        if path is not None:
            try:
                user = yaml.safe_load(Path(path).read_text()) or {}
            except OSError as exc:
                raise ConfigError(str(path), f"cannot read config: {exc}") from exc
            except yaml.YAMLError as exc:
                raise ConfigError(str(path), f"malformed YAML: {exc}") from exc
            data = merge(data, user)
        for ov in overrides or []:
            data = merge(data, ov)
        cfg = cls(data)
        cfg.validate()
        return cfg

    def dumps(self) -> str:
        return yaml.safe_dump(self.data, sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "SurveyConfig":
        return cls.from_sources(overrides=[yaml.safe_load(text)])

    @property
    def sha256(self) -> str:
        canon = json.dumps(self.data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    @property
    def seed(self) -> int:
        return int(self.data["seed"])

    def section(self, name: str) -> dict:
        return self.data[name]

    # builders; each maps module validation errors to the offending section

    def _build(self, section: str, fn):
        try:
            return fn(self.data[section])
        except ConfigError:
            raise
        except (DeckInspectError, ValueError, TypeError) as exc:
            raise ConfigError(section, str(exc)) from exc

    def deck(self) -> DeckSpec:
        d = self.data["deck"]
        for key in ("length_m", "width_m", "scan_width_m"):
            if not d[key] > 0:
                raise ConfigError(f"deck.{key}", "must be positive")
        for key in ("curb_offset_m", "lane_tolerance_m"):
            if d[key] < 0:
                raise ConfigError(f"deck.{key}", "must be nonnegative")
        if 2 * d["curb_offset_m"] >= d["width_m"]:
            raise ConfigError("deck.curb_offset_m", "curb offsets leave no surveyable width")
        return self._build(
            "deck",
            lambda d: DeckSpec(d["length_m"], d["width_m"], d["curb_offset_m"], d["scan_width_m"], (0.0, 0.0), d["lane_tolerance_m"]),
        )

    def plan(self) -> MissionPlan:
        deck = self.deck()
        return self._build(
            "mission",
            lambda m: plan_lawnmower(deck, m["mode"], m["cruise_speed_mps"], m["station_spacing_m"], m["dwell_time_s"]),
        )

    def controller(self) -> ControllerParams:
        return self._build("controller", lambda c: ControllerParams(c["lambda_per_s"]))

    def gains(self) -> GainPolicy:
        def build(c):
            if not 0 < c["k_offset"] < 1:
                raise ConfigError("controller.k_offset", "must lie in (0, 1)")
            if not c["min_displacement_m"] > 0:
                raise ConfigError("controller.min_displacement_m", "must be positive")
            return GainPolicy(c["k_offset"], c["min_displacement_m"])

        return self._build("controller", build)

    def noise(self) -> NoiseModel:
        return self._build("noise", lambda n: NoiseModel(n["pose_sigma_m"], n["heading_sigma_rad"], self.seed))

    def sim_kwargs(self) -> dict:
        m = self.data["mission"]
        if not 0 < m["dt_s"] <= 0.1:
            raise ConfigError("mission.dt_s", "must lie in (0, 0.1]")
        for key in ("capture_radius_m", "arrival_tolerance_m", "max_transition_time_s", "divergence_window_s"):
            if not m[key] > 0:
                raise ConfigError(f"mission.{key}", "must be positive")
        return {
            "dt": m["dt_s"],
            "capture_radius": m["capture_radius_m"],
            "arrival_tolerance": m["arrival_tolerance_m"],
            "max_transition_time": m["max_transition_time_s"],
            "divergence_window": m["divergence_window_s"],
        }

    def physics(self) -> NDEPhysics:
        def build(n):
            return NDEPhysics(
                c_p=n["p_wave_speed_mps"], density=n["density_kg_m3"], poisson=n["poisson_ratio"], beta1=n["beta1"],
                thickness=self.data["slab"]["thickness_m"], sample_rate=n["sample_rate_hz"], ie_samples=n["ie_samples"],
                ie_channels=n["ie_channels"], ie_decay_s=n["ie_decay_s"], flexural_ratio=n["flexural_ratio"],
                flexural_amplitude=n["flexural_amplitude"], shallow_max_depth=n["shallow_max_depth_m"],
                snr_db=n["snr_db"], usw_samples=n["usw_samples"], usw_records=n["usw_records"],
                usw_spacing=n["usw_spacing_m"], usw_center_hz=n["usw_center_hz"], usw_onset_s=n["usw_onset_s"],
                usw_band=tuple(n["usw_band_hz"]), er_spacing=n["er_spacing_m"], er_current=n["er_current_a"],
                rho_sound=n["rho_sound_ohm_m"], rho_corroded=n["rho_corroded_ohm_m"],
                corrosion_velocity_factor=n["corrosion_velocity_factor"],
            )

        return self._build("nde", build)

    def analysis(self) -> AnalysisSettings:
        n = self.data["nde"]
        if not 0 <= n["coherence_gate"] <= 1:
            raise ConfigError("nde.coherence_gate", "must lie in [0, 1]")
        bands = IEBands(n["ie_good_tolerance"], n["ie_fair_upper_ratio"], n["ie_flexural_ratio"])
        return AnalysisSettings(self.physics(), bands, n["coherence_gate"])

    def map_bands(self, kind: str) -> ClassBands:
        m = self.data["map"]
        key = {"delamination": "delamination_edges", "modulus": "modulus_edges_gpa", "resistivity": "resistivity_edges_ohm_m"}[kind]
        base = DEFAULT_BANDS[kind]
        return self._build("map", lambda _: ClassBands(tuple(m[key]), base.labels, base.lower_is_worse, base.aggregate))

    def map_kwargs(self) -> dict:
        m = self.data["map"]
        if not m["cell_size_m"] > 0:
            raise ConfigError("map.cell_size_m", "must be positive")
        if m["max_gap_m"] < 0:
            raise ConfigError("map.max_gap_m", "must be nonnegative")
        if m["pixels_per_cell"] < 1:
            raise ConfigError("map.pixels_per_cell", "must be at least 1")
        return {"cell_size": m["cell_size_m"], "max_gap": m["max_gap_m"], "power": m["idw_power"]}

    def crack_params(self) -> CrackParams:
        def build(c):
            tau = c["tau"]
            if isinstance(tau, str) and tau != "otsu":
                raise ConfigError("crack.tau", "must be 'otsu' or a number")
            return CrackParams(
                tau=tau, kernel_set=c["kernel_set"], clean_fraction=c["clean_fraction"], clean_passes=c["clean_passes"],
                linking=LinkingParams(c["window_px"], c["max_link_distance_px"], c["k_p"], c["k_d"]),
                denoise=DenoiseParams(c["min_component_px"], c["t_d_px"], c["t_a_px"]),
                width_step=c["width_step_px"],
            )

        return self._build("crack", build)

    def corpus_params(self) -> CorpusParams:
        def build(c):
            if c["images"] < 1:
                raise ConfigError("corpus.images", "must be at least 1")
            if not c["scale_m_per_px"] > 0:
                raise ConfigError("corpus.scale_m_per_px", "must be positive")
            if c["rows_px"] < 64 or c["cols_px"] < 64:
                raise ConfigError("corpus", "images must be at least 64x64")
            return CorpusParams(
                size=(c["rows_px"], c["cols_px"]), salt_pepper=c["salt_pepper_fraction"],
                illumination=c["illumination"], gap_probability=c["gap_probability"],
            )

        return self._build("corpus", build)

    def camera(self) -> CameraFootprint:
        return self._build(
            "camera",
            lambda c: CameraFootprint(c["along_m"], c["across_m"], tuple(c["offset_m"]), c["cols_px"], c["rows_px"]),
        )

    def validate(self) -> None:
        self.plan()
        self.controller()
        self.gains()
        self.noise()
        self.sim_kwargs()
        self.analysis()
        for kind in DEFAULT_BANDS:
            self.map_bands(kind)
        self.map_kwargs()
        self.crack_params()
        self.corpus_params()
        self.camera()
        if self.data["slab"]["scenario"] not in ("random", "validation", "uniform"):
            raise ConfigError("slab.scenario", "must be random, validation or uniform")
        if not self.data["slab"]["cell_size_m"] > 0:
            raise ConfigError("slab.cell_size_m", "must be positive")
        if self.data["slab"]["defects"] < 0 or self.data["scene"]["cracks"] < 0:
            raise ConfigError("slab.defects", "counts must be nonnegative")
