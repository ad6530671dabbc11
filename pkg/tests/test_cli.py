import json

import numpy as np
import pytest
from PIL import Image

from deckinspect.cli import main
from deckinspect.nde.slab import SlabModel
from deckinspect.records import read_jsonl

SMALL = ["--set", "deck.length_m=6.0", "--set", "deck.width_m=4.0"]


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    return code, capsys.readouterr().err


def error_line(err):
    lines = [l for l in err.splitlines() if l.startswith("{")]
    return json.loads(lines[-1])


@pytest.fixture(scope="module")
def default_sim(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert main(["simulate", "--out", str(out), "--jobs", "2"]) == 0
    return out


def test_default_simulation_emits_303_records(default_sim):
    recs, bad = read_jsonl(default_sim / "stations.jsonl")
    assert len(recs) == 303 and bad == 0
    assert [r["station"] for r in recs] == list(range(303))
    manifest = json.loads((default_sim / "manifest.json").read_text())
    names = {a["path"] for a in manifest["artifacts"]}
    assert {"pose_log.csv", "stations.jsonl", "slab.json", "mission_summary.json"} <= names
    assert all(len(a["sha256"]) == 64 for a in manifest["artifacts"])


def test_zero_length_mission(tmp_path, capsys):
    code, err = run(capsys, "simulate", "--out", tmp_path, "--set", "deck.length_m=0")
    assert code == 2
    line = error_line(err)
    assert line["exit_code"] == 2 and line["field"] == "deck.length_m"


def test_unknown_key_and_bad_flags(tmp_path, capsys):
    code, err = run(capsys, "simulate", "--out", tmp_path, "--set", "deck.bogus=1")
    assert code == 2 and error_line(err)["field"] == "deck.bogus"
    code, _ = run(capsys, "simulate", "--out", tmp_path, "--jobs", "0")
    assert code == 2
    code, _ = run(capsys, "frobnicate")
    assert code == 2


def test_simulation_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["simulate", *SMALL, "--set", "noise.pose_sigma_m=0.005"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b), "--jobs", "2"]) == 0
    assert (a / "manifest.json").read_bytes() == (b / "manifest.json").read_bytes()


def test_nonstop_analyze_skips_and_empty_map(tmp_path, capsys, caplog):
    assert main(["simulate", *SMALL, "--mode", "non-stop", "--out", str(tmp_path)]) == 0
    code, _ = run(capsys, "analyze", tmp_path / "stations.jsonl", "--kind", "er", "--out", tmp_path)
    assert code == 0
    assert "no er payload" in caplog.text
    code, err = run(capsys, "map", tmp_path / "results.jsonl", "--kind", "resistivity", "--out", tmp_path)
    assert code == 3 and error_line(err)["exit_code"] == 3


def test_all_malformed_records(tmp_path, capsys):
    p = tmp_path / "junk.jsonl"
    p.write_text("nope\n{\"x\": 1}\n")
    code, _ = run(capsys, "analyze", p, "--out", tmp_path)
    assert code == 3


def _truth_class(cell, thickness=0.2):
    """Expected IE grade from the cell's physics and the default ratio bands."""
    d = cell["delamination"]
    if 0 < d <= 0.075:
        return "serious"
    speed = cell["modulus_multiplier"] ** 0.5 * (0.97 if cell["corrosion"] else 1.0)
    r = speed * thickness / (d if d > 0 else thickness)
    if abs(r - 1) <= 0.1:
        return "good"
    return "fair" if r <= 1.5 else "poor"


def test_solid_slab_all_good(tmp_path):
    assert main(["slab-gen", *SMALL, "--set", "slab.scenario=uniform", "--out", str(tmp_path)]) == 0
    assert main(["analyze", str(tmp_path / "lattice_stations.jsonl"), "--kind", "ie", "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "analysis_report.json").read_text())
    assert set(report["ie_classes"]) == {"good"}


def test_validation_slab_census(tmp_path):
    assert main(["slab-gen", "--set", "slab.scenario=validation", "--out", str(tmp_path)]) == 0
    slab = SlabModel.from_dict(json.loads((tmp_path / "slab.json").read_text()))
    assert main(["analyze", str(tmp_path / "lattice_stations.jsonl"), "--out", str(tmp_path)]) == 0
    results, _ = read_jsonl(tmp_path / "results.jsonl")
    truth = {}
    for r in results:
        c = _truth_class(slab.cell(r["x"], r["y"]))
        truth[c] = truth.get(c, 0) + 1
    report = json.loads((tmp_path / "analysis_report.json").read_text())
    for c, n in truth.items():
        assert abs(report["ie_classes"].get(c, 0) - n) <= max(1, 0.1 * n)
    assert main(["map", str(tmp_path / "results.jsonl"), "--out", str(tmp_path)]) == 0
    for kind in ("delamination", "modulus", "resistivity"):
        assert (tmp_path / f"map_{kind}.png").exists()


def test_oversized_cell_single_cell_map(tmp_path):
    assert main(["slab-gen", *SMALL, "--set", "slab.scenario=uniform", "--out", str(tmp_path)]) == 0
    assert main(["analyze", str(tmp_path / "lattice_stations.jsonl"), "--out", str(tmp_path)]) == 0
    assert main(["map", str(tmp_path / "results.jsonl"), "--set", "map.cell_size_m=100", "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "map_delamination.csv").read_text().splitlines()
    assert len(rows) == 2 and rows[1].endswith(",good,measured")
    img = np.asarray(Image.open(tmp_path / "map_delamination.png"))
    assert len({tuple(p) for p in img.reshape(-1, 3)}) == 1


def test_detect_blank_tiny_and_unreadable(tmp_path, capsys, caplog):
    imgs = tmp_path / "imgs"
    imgs.mkdir()
    Image.fromarray(np.full((40, 40), 200, dtype=np.uint8)).save(imgs / "blank.png")
    Image.fromarray((np.arange(9, dtype=np.uint8) * 20).reshape(3, 3)).save(imgs / "tiny.png")
    Image.fromarray(np.zeros((2, 2), dtype=np.uint8)).save(imgs / "undersized.png")
    (imgs / "broken.png").write_bytes(b"not an image")
    code, err = run(capsys, "detect-cracks", imgs, "--out", tmp_path / "out")
    assert code == 0
    assert "broken.png" in caplog.text and "undersized.png" in caplog.text
    stats = json.loads((tmp_path / "out" / "crack_stats.json").read_text())
    assert stats["images"]["blank"]["empty"] is True
    assert "tiny" in stats["images"]


def test_detect_nothing_readable(tmp_path, capsys):
    (tmp_path / "x.png").write_bytes(b"junk")
    code, _ = run(capsys, "detect-cracks", tmp_path, "--out", tmp_path / "out")
    assert code == 3


def test_detect_synthetic_meets_floors(tmp_path):
    assert main(["detect-cracks", "--synthetic", "--set", "corpus.images=8", "--out", str(tmp_path), "--jobs", "2"]) == 0
    stats = json.loads((tmp_path / "crack_stats.json").read_text())
    ev = stats["evaluation"]
    assert ev["precision"] >= 0.85 and ev["recall"] >= 0.85 and ev["meets_floors"]


def test_corpus_gen(tmp_path):
    assert main(["corpus-gen", "--set", "corpus.images=3", "--out", str(tmp_path)]) == 0
    gt = json.loads((tmp_path / "corpus" / "ground_truth.json").read_text())
    assert len(gt) == 3
