"""Command-line entry point.

Exit codes: 0 success, 2 configuration or validation error, 3 runtime or
analysis failure. Failures print one JSON object on stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import __version__
from .config import SurveyConfig, parse_override
from .crack.corpus import generate_corpus, write_corpus
from .crack.georef import Tile, assemble_crack_map
from .crack.image import load_image, save_mask
from .crack.paths import crack_statistics
from .crack.pipeline import CrackParams, detect_cracks, evaluate_mask
from .crack.scene import random_deck_cracks, render_tile
from .errors import ConfigError, DeckInspectError, InvalidInputError, PlanningError
from .mission import Station, simulate_mission
from .navigation import Pose2D
from .nde.mapping import STATUS_NODATA, grid_condition_map, write_heatmap
from .nde.slab import SlabModel, lattice_positions, random_deck_slab, uniform_slab, validation_slab
from .records import (
    ANALYSIS_KINDS,
    AnalysisSettings,
    analyze_record,
    map_records,
    read_jsonl,
    station_measurements,
    write_jsonl,
)

log = logging.getLogger("deckinspect")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
MAP_KINDS = ("delamination", "modulus", "resistivity")


class RuntimeFailure(DeckInspectError):
    pass


# ---------------------------------------------------------------- helpers


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out: Path, cfg: SurveyConfig, command: str, artifacts: Iterable[Path]) -> Path:
    paths = sorted({Path(p) for p in artifacts}, key=lambda p: p.relative_to(out).as_posix())
    manifest = {
        "tool": "deckinspect",
        "version": __version__,
        "command": command,
        "seed": cfg.seed,
        "config_sha256": cfg.sha256,
        "artifacts": [
            {"path": p.relative_to(out).as_posix(), "sha256": _sha256(p), "bytes": p.stat().st_size} for p in paths
        ],
    }
    dest = out / "manifest.json"
    dest.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return dest


def _pmap(fn: Callable, items: Sequence, jobs: int) -> list:
    """Order-preserving map, optionally over a process pool."""
    if jobs <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))


def _write_config(out: Path, cfg: SurveyConfig) -> Path:
    p = out / "config_resolved.yaml"
    p.write_text(cfg.dumps())
    return p


def build_slab(cfg: SurveyConfig) -> SlabModel:
    s = cfg.section("slab")
    deck = cfg.deck()
    if s["scenario"] == "validation":
        return validation_slab(s["cell_size_m"])
    if s["scenario"] == "uniform":
        return uniform_slab(deck.length, deck.width, s["thickness_m"], s["cell_size_m"])
    return random_deck_slab(deck.length, deck.width, cfg.seed, s["defects"], s["cell_size_m"], s["thickness_m"])


def _station_dict(st: Station) -> dict:
    return {
        "index": st.index,
        "scan_line": st.scan_line,
        "timestamp": st.timestamp,
        "pose": [st.pose.x, st.pose.y, st.pose.heading],
        "true_pose": [st.true_pose.x, st.true_pose.y, st.true_pose.heading],
    }


# ---------------------------------------------------------------- stages


def _measure_chunk(args) -> list[dict]:
    stations, slab_dict, mode, physics, seed = args
    return station_measurements(stations, SlabModel.from_dict(slab_dict), mode, physics, seed)


def stage_simulate(cfg: SurveyConfig, out: Path, jobs: int = 1) -> tuple[list[Path], list[Station], SlabModel]:
    plan = cfg.plan()
    result = simulate_mission(
        plan, cfg.controller(), cfg.gains(), cfg.noise(), **cfg.sim_kwargs()
    )
    slab = build_slab(cfg)
    pose_log = out / "pose_log.csv"
    result.log.write_csv(pose_log)
    slab_path = out / "slab.json"
    slab_path.write_text(json.dumps(slab.to_dict(), sort_keys=True) + "\n")

    chunks = [result.stations[k : k + 16] for k in range(0, len(result.stations), 16)]
    sd = slab.to_dict()
    parts = _pmap(_measure_chunk, [(c, sd, plan.mode, cfg.physics(), cfg.seed) for c in chunks], jobs)
    records = [r for part in parts for r in part]
    rec_path = out / "stations.jsonl"
    write_jsonl(records, rec_path)

    summary = out / "mission_summary.json"
    summary.write_text(
        json.dumps(
            {
                "lanes": plan.n_lanes,
                "planned_stations": len(plan.stations),
                "captured_stations": len(result.stations),
                "duration_s": round(result.duration, 6),
                "nominal_duration_s": round(plan.nominal_duration, 6),
                "transition_times_s": [round(t, 6) for t in result.transition_times],
                "mode": plan.mode,
                "scan_lines": [[list(a), list(b)] for a, b in plan.scan_lines],
                "safe_waypoints": [list(w) for w in plan.safe_waypoints],
            },
            indent=2,
            sort_keys=True,
        )
        + "\n"
    )
    log.info("simulated %d lanes, %d/%d stations, %.1f s", plan.n_lanes, len(result.stations), len(plan.stations), result.duration)
    return [pose_log, slab_path, rec_path, summary], result.stations, slab


def _analyze_one(args):
    rec, kinds, settings = args
    return analyze_record(rec, kinds, settings)


def analyze_records_parallel(records: list[dict], kinds: Sequence[str], settings: AnalysisSettings, jobs: int = 1):
    outcomes = _pmap(_analyze_one, [(r, tuple(kinds), settings) for r in records], jobs)
    results = [o.result for o in outcomes if o.result is not None]
    results.sort(key=lambda r: r["station"])
    warnings = [w for o in outcomes for w in o.warnings]
    malformed = sum(o.malformed for o in outcomes)
    return results, warnings, malformed


def stage_analyze(cfg: SurveyConfig, records_path: Path, kind: str, out: Path, jobs: int = 1) -> list[Path]:
    records, unparsed = read_jsonl(records_path)
    kinds = ANALYSIS_KINDS if kind == "all" else (kind,)
    results, warnings, malformed = analyze_records_parallel(records, kinds, cfg.analysis(), jobs)
    malformed += unparsed
    for w in warnings:
        log.warning(w)
    if not results:
        raise RuntimeFailure(f"all {malformed} records in {records_path} are malformed")
    res_path = out / "results.jsonl"
    write_jsonl(results, res_path)
    census = {}
    for r in results:
        if "ie" in r:
            c = r["ie"]["condition"]
            census[c] = census.get(c, 0) + 1
    report = out / "analysis_report.json"
    report.write_text(
        json.dumps(
            {"records": len(records) + unparsed, "analyzed": len(results), "malformed": malformed,
             "skipped": len(warnings), "ie_classes": dict(sorted(census.items())), "kinds": list(kinds)},
            indent=2,
            sort_keys=True,
        )
        + "\n"
    )
    return [res_path, report]


def stage_map(cfg: SurveyConfig, results_path: Path, kind: str, out: Path, extent=None) -> list[Path]:
    results, _ = read_jsonl(results_path)
    kinds = MAP_KINDS if kind == "all" else (kind,)
    kw = cfg.map_kwargs()
    ppc = cfg.section("map")["pixels_per_cell"]
    written = []
    made = 0
    for k in kinds:
        recs = map_records(results, k)
        if not recs:
            if kind != "all":
                raise RuntimeFailure(f"no {k} values to map")
            log.warning("no %s values, map skipped", k)
            continue
        ext = extent
        if ext is None:
            xs = [r[0] for r in recs]
            ys = [r[1] for r in recs]
            ext = (0.0, 0.0, max(xs) + 1e-6, max(ys) + 1e-6)
        grid = grid_condition_map(recs, k, extent=ext, bands=cfg.map_bands(k), **kw)
        csv_path = out / f"map_{k}.csv"
        png_path = out / f"map_{k}.png"
        grid.write_csv(csv_path)
        write_heatmap(grid, png_path, ppc)
        frac_path = out / f"map_{k}_summary.json"
        frac_path.write_text(
            json.dumps(
                {"kind": k, "shape": list(grid.shape), "class_fractions": grid.class_fractions(),
                 "nodata_cells": int((grid.status == STATUS_NODATA).sum())},
                indent=2,
                sort_keys=True,
            )
            + "\n"
        )
        written += [csv_path, png_path, frac_path]
        made += 1
    if not made:
        raise RuntimeFailure("no map could be produced: results hold no mappable values")
    return written


def _detect_file(args):
    path, params, scale = args
    try:
        img = load_image(path, scale)
        if img.width < 3 or img.height < 3:
            raise InvalidInputError(f"{path.name} is smaller than 3x3")
        return detect_cracks(img, params), None
    except InvalidInputError as exc:
        return None, str(exc)


def _paths_rows(image_id: str, det, scale: float) -> list[list]:
    rows = []
    for k, p in enumerate(det.paths):
        poly = ";".join(f"{(c + 0.5) * scale:.5f} {(r + 0.5) * scale:.5f}" for r, c in p.pixels[:: max(1, len(p.pixels) // 64)])
        rows.append([image_id, k, f"{p.length_m:.6f}", f"{p.mean_width_m:.6f}", f"{p.max_width_m:.6f}", poly])
    return rows


def _write_paths_csv(path: Path, rows: list[list]) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["image_id", "id", "length_m", "mean_width_m", "max_width_m", "polyline_xy_m"])
        w.writerows(rows)


def _detect_sample(args):
    sample, params, tol = args
    det = detect_cracks(sample.image, params)
    return det, evaluate_mask(det.mask, sample.truth, tol)


def stage_detect(cfg: SurveyConfig, out: Path, images: Path | None, synthetic: bool, jobs: int = 1) -> list[Path]:
    params = cfg.crack_params()
    c = cfg.section("crack")
    mask_dir = out / "masks"
    mask_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    per_image = {}
    rows: list[list] = []
    all_paths = []
    if synthetic:
        corp = cfg.section("corpus")
        samples = generate_corpus(corp["images"], cfg.seed, cfg.corpus_params(), corp["scale_m_per_px"])
        outs = _pmap(_detect_sample, [(s, params, c["match_tolerance_px"]) for s in samples], jobs)
        tp = npd = tt = nt = 0
        for s, (det, ev) in zip(samples, outs):
            tp += ev["tp_pred"]
            npd += ev["n_pred"]
            tt += ev["tp_truth"]
            nt += ev["n_truth"]
            per_image[det.image_id] = {**det.stats, "precision": ev["precision"], "recall": ev["recall"]}
            m = mask_dir / f"{det.image_id}_mask.png"
            save_mask(det.mask, m)
            written.append(m)
            rows += _paths_rows(det.image_id, det, s.image.scale)
            all_paths += det.paths
        precision = tp / npd if npd else 1.0
        recall = tt / nt if nt else 1.0
        evaluation = {
            "precision": precision,
            "recall": recall,
            "precision_floor": c["precision_floor"],
            "recall_floor": c["recall_floor"],
            "meets_floors": precision >= c["precision_floor"] and recall >= c["recall_floor"],
            "truth_total_length_m": float(sum(L * s.image.scale for s in samples for L in s.lengths_px)),
        }
    else:
        if images is None or not images.is_dir():
            raise ConfigError("images", f"not a readable directory: {images}")
        files = sorted(p for p in images.iterdir() if p.suffix.lower() in (".png", ".pgm", ".pnm", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"))
        scale = cfg.section("corpus")["scale_m_per_px"]
        outs = _pmap(_detect_file, [(f, params, scale) for f in files], jobs)
        ok = 0
        for f, (det, err) in zip(files, outs):
            if det is None:
                log.warning("skipping %s: %s", f.name, err)
                continue
            ok += 1
            per_image[det.image_id] = det.stats
            m = mask_dir / f"{det.image_id}_mask.png"
            save_mask(det.mask, m)
            written.append(m)
            rows += _paths_rows(det.image_id, det, scale)
            all_paths += det.paths
        if not ok:
            raise RuntimeFailure(f"no readable images in {images}")
        evaluation = None
    overall = crack_statistics(all_paths) if all_paths else crack_statistics([])
    # locations are per-image; only magnitudes are meaningful across images
    for key in ("longest_xy", "shortest_xy", "max_width_xy", "min_width_xy"):
        overall.pop(key, None)
    stats = out / "crack_stats.json"
    stats.write_text(json.dumps({"overall": overall, "images": per_image, "evaluation": evaluation}, indent=2, sort_keys=True) + "\n")
    paths_csv = out / "crack_paths.csv"
    _write_paths_csv(paths_csv, rows)
    return written + [stats, paths_csv]


def _tile_job(args):
    cracks, st, fp, seed, params, prm = args
    img, _ = render_tile(cracks, st.true_pose, fp, np.random.default_rng([seed, 11, st.index]), prm, f"tile_{st.index:05d}")
    det = detect_cracks(img, params)
    return Tile(img.image_id, st.pose, det.paths)


def stage_crack_map(cfg: SurveyConfig, stations: list[Station], out: Path, jobs: int = 1) -> list[Path]:
    deck = cfg.deck()
    fp = cfg.camera()
    extent = (0.0, 0.0, deck.length, deck.width)
    scale = 0.5 * (fp.scale_along + fp.scale_across)
    cracks = random_deck_cracks(extent, cfg.section("scene")["cracks"], cfg.seed, cfg.corpus_params(), scale)
    params = cfg.crack_params()
    prm = cfg.corpus_params()
    tiles = _pmap(_tile_job, [(cracks, st, fp, cfg.seed, params, prm) for st in stations], jobs)
    cmap = assemble_crack_map(tiles, fp, extent)
    path = out / "crack_map.csv"
    cmap.write_csv(path)
    entries = cmap.entries
    summary = {"cracks": len(entries), "total_length_m": cmap.total_length_m}
    if entries:
        longest = max(entries, key=lambda e: e.length_m)
        shortest = min(entries, key=lambda e: e.length_m)
        widest = max(entries, key=lambda e: e.max_width_m)
        narrowest = min(entries, key=lambda e: e.mean_width_m)

        def mid(e):
            return [round(float(v), 4) for v in e.polyline[len(e.polyline) // 2]]

        summary.update(
            longest_m=longest.length_m, longest_xy=mid(longest), shortest_m=shortest.length_m, shortest_xy=mid(shortest),
            max_width_m=widest.max_width_m, max_width_xy=mid(widest), min_width_m=narrowest.mean_width_m,
            min_width_xy=mid(narrowest),
        )
    spath = out / "crack_map_stats.json"
    spath.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return [path, spath]


def _lattice_records(cfg: SurveyConfig, slab: SlabModel) -> list[dict]:
    spacing = cfg.section("mission")["station_spacing_m"]
    stations = [
        Station(k, Pose2D(x, y), 0.0, 0, Pose2D(x, y), (x, y)) for k, (x, y) in enumerate(lattice_positions(slab, spacing))
    ]
    return station_measurements(stations, slab, "stop-move", cfg.physics(), cfg.seed)


# ---------------------------------------------------------------- commands


def cmd_simulate(cfg, args, out):
    files, _, _ = stage_simulate(cfg, out, args.jobs)
    return files


def cmd_analyze(cfg, args, out):
    return stage_analyze(cfg, Path(args.records), args.kind, out, args.jobs)


def cmd_map(cfg, args, out):
    extent = tuple(float(v) for v in args.extent.split(",")) if args.extent else None
    if extent is not None and len(extent) != 4:
        raise ConfigError("extent", "expected x0,y0,x1,y1")
    return stage_map(cfg, Path(args.results), args.kind, out, extent)


def cmd_detect(cfg, args, out):
    if not args.synthetic and not args.images:
        raise ConfigError("images", "give an image directory or --synthetic")
    return stage_detect(cfg, out, Path(args.images) if args.images else None, args.synthetic, args.jobs)


def cmd_slab_gen(cfg, args, out):
    slab = build_slab(cfg)
    p = out / "slab.json"
    p.write_text(json.dumps(slab.to_dict(), sort_keys=True) + "\n")
    rec = out / "lattice_stations.jsonl"
    write_jsonl(_lattice_records(cfg, slab), rec)
    return [p, rec]


def cmd_corpus_gen(cfg, args, out):
    corp = cfg.section("corpus")
    samples = generate_corpus(corp["images"], cfg.seed, cfg.corpus_params(), corp["scale_m_per_px"])
    return write_corpus(samples, out / "corpus")


def cmd_run(cfg, args, out):
    files, stations, slab = stage_simulate(cfg, out, args.jobs)
    files += stage_analyze(cfg, out / "stations.jsonl", "all", out, args.jobs)
    deck = cfg.deck()
    files += stage_map(cfg, out / "results.jsonl", "all", out, (0.0, 0.0, deck.length, deck.width))
    files += stage_crack_map(cfg, stations, out, args.jobs)
    return files


COMMANDS = {
    "simulate": cmd_simulate,
    "analyze": cmd_analyze,
    "map": cmd_map,
    "detect-cracks": cmd_detect,
    "slab-gen": cmd_slab_gen,
    "corpus-gen": cmd_corpus_gen,
    "run": cmd_run,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML config layered over the packaged defaults")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one key, e.g. deck.width_m=6.1")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--jobs", type=int, default=1, help="worker processes")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="deckinspect", description="Bridge-deck survey simulation and analysis.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("simulate", parents=[common], help="plan and simulate a survey, emit pose log and station records")
    s.add_argument("--mode", choices=("stop-move", "non-stop"))
    a = sub.add_parser("analyze", parents=[common], help="IE/USW/ER analysis of station records")
    a.add_argument("records")
    a.add_argument("--kind", choices=("ie", "usw", "er", "all"), default="all")
    m = sub.add_parser("map", parents=[common], help="condition maps from analysis results")
    m.add_argument("results")
    m.add_argument("--kind", choices=MAP_KINDS + ("all",), default="all")
    m.add_argument("--extent", help="x0,y0,x1,y1 in metres")
    d = sub.add_parser("detect-cracks", parents=[common], help="crack detection on images or the synthetic corpus")
    d.add_argument("images", nargs="?")
    d.add_argument("--synthetic", action="store_true", help="generate and score the synthetic corpus")
    sub.add_parser("slab-gen", parents=[common], help="emit a ground-truth slab and lattice station records")
    sub.add_parser("corpus-gen", parents=[common], help="emit the synthetic crack corpus")
    r = sub.add_parser("run", parents=[common], help="simulate, analyze, map and crack-map in one go")
    r.add_argument("--mode", choices=("stop-move", "non-stop"))
    return p


def _fail(code: int, exc: BaseException, field: str | None = None) -> int:
    line = {"error": type(exc).__name__, "message": str(getattr(exc, "message", exc)), "exit_code": code}
    if field is not None:
        line["field"] = field
    print(json.dumps(line, sort_keys=True), file=sys.stderr)
    return code


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code in (0, None):
            return 0
        return _fail(EXIT_CONFIG, ValueError("invalid command line"), "argv")
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        overrides = [parse_override(s) for s in args.set]
        if args.seed is not None:
            overrides.append({"seed": args.seed})
        if getattr(args, "mode", None):
            overrides.append({"mission": {"mode": args.mode}})
        if args.jobs < 1:
            raise ConfigError("jobs", "must be at least 1")
        cfg = SurveyConfig.from_sources(args.config, overrides)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        files = COMMANDS[args.command](cfg, args, out)
        files.append(_write_config(out, cfg))
        write_manifest(out, cfg, args.command, files)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, exc, exc.field)
    except (InvalidInputError, PlanningError) as exc:
        return _fail(EXIT_CONFIG, exc)
    except (DeckInspectError, OSError) as exc:
        return _fail(EXIT_RUNTIME, exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
