import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from deckinspect.crack.cleaning import (
    CrackRegion,
    crack_regions,
    morphological_clean,
    regions_to_mask,
    remove_noise_by_region,
    remove_small_components,
    threshold_crack_pixels,
)
from deckinspect.crack.corpus import CorpusParams, generate_sample
from deckinspect.crack.georef import CameraFootprint, assemble_crack_map, deck_to_pixel, georeference, Tile
from deckinspect.crack.gradients import (
    K0, K1, K2, K3, K7_UNCORRECTED, GradientField, directional_gradients, gradient_magnitude_orientation, kernel_bank,
)
from deckinspect.crack.image import GrayImage, load_image, save_gray, to_gray
from deckinspect.crack.paths import (
    CrackPath, LinkingParams, crack_statistics, estimate_width, link_cost, link_cracks, path_length_px, skeleton_paths,
)
from deckinspect.crack.pipeline import detect_cracks, evaluate_mask
from deckinspect.errors import InvalidInputError
from deckinspect.navigation import Pose2D

import oracles

small_ints = arrays(np.int64, (6, 7), elements=st.integers(0, 255))


# gradients

def test_uniform_image_zero_response():
    r = directional_gradients(np.full((9, 9), 123, dtype=np.uint8))
    assert r.shape == (8, 9, 9)
    assert not r.any()


def test_vertical_step_response():
    img = np.zeros((6, 8), dtype=np.uint8)
    img[:, 4:] = 255
    r0 = directional_gradients(img)[0]
    assert np.abs(r0).max() == 765
    assert set(np.flatnonzero(np.abs(r0).max(axis=0) == 765)) == {3, 4}


def test_random_5x5_matches_loop():
    img = np.random.default_rng(0).integers(0, 256, (5, 5))
    r = directional_gradients(img)
    for k, kern in enumerate(kernel_bank()):
        np.testing.assert_array_equal(r[k], oracles.direct_convolution(img, kern))


def test_kernel_identities():
    bank = kernel_bank("standard")
    for got, want in zip(bank[:4], (K0, K1, K2, K3)):
        np.testing.assert_array_equal(got, want)
    np.testing.assert_array_equal(bank[4], K2.T)
    np.testing.assert_array_equal(bank[5], K1.T)
    np.testing.assert_array_equal(bank[6], K2.T)
    assert all(k.sum() == 0 for k in bank)
    assert K7_UNCORRECTED.sum() != 0
    np.testing.assert_array_equal(kernel_bank("uncorrected")[7], K7_UNCORRECTED)
    rot = kernel_bank("rotation")
    for k in range(4):
        np.testing.assert_array_equal(rot[k + 4], -rot[k])


@given(small_ints, small_ints, st.integers(-3, 3), st.integers(-3, 3))
def test_convolution_linearity(a, b, alpha, beta):
    lhs = directional_gradients(alpha * a + beta * b)
    rhs = alpha * directional_gradients(a) + beta * directional_gradients(b)
    np.testing.assert_array_equal(lhs, rhs)


def test_small_image_rejected():
    with pytest.raises(InvalidInputError):
        directional_gradients(np.zeros((2, 5)))


def test_magnitude_orientation_examples():
    f = gradient_magnitude_orientation(np.zeros((8, 3, 3)))
    assert not f.magnitude.any() and not f.orientation.any()
    r = np.zeros((8, 2, 2))
    r[3] = -4.0
    f = gradient_magnitude_orientation(r)
    assert (f.magnitude == 4).all()
    np.testing.assert_allclose(f.angle, 3 * math.pi / 4)


def test_magnitude_orientation_scalar_scan():
    r = np.random.default_rng(1).integers(-5, 6, (8, 10, 10))
    f = gradient_magnitude_orientation(r)
    for i in range(10):
        for j in range(10):
            best_k, best = 0, -1
            for k in range(8):
                if abs(r[k, i, j]) > best:
                    best_k, best = k, abs(r[k, i, j])
            assert f.orientation[i, j] == best_k
            assert f.magnitude[i, j] == best


# thresholding and cleaning

def test_threshold_bounds():
    m = np.array([[0.0, 1.0], [2.0, 0.0]])
    f = GradientField(m, np.zeros_like(m, dtype=int))
    assert not threshold_crack_pixels(f, m.max() + 1).any()
    np.testing.assert_array_equal(threshold_crack_pixels(f, 0.0), m > 0)
    with pytest.raises(InvalidInputError):
        threshold_crack_pixels(f, "median")


def _thin_line_image():
    img = np.full((40, 60), 200.0)
    truth = np.zeros((40, 60), dtype=bool)
    truth[20, 5:55] = True
    img[truth] = 100.0
    return img, truth


def test_otsu_recovers_thin_line():
    img, truth = _thin_line_image()
    mask = threshold_crack_pixels(gradient_magnitude_orientation(directional_gradients(img)))
    # the centre of a 1-px line has zero response; the flanks carry it
    near = evaluate_mask(mask, truth, tolerance=1.0)
    assert near["recall"] >= 0.95
    cleaned = morphological_clean(mask)
    assert (cleaned & truth).sum() >= 0.95 * truth.sum()


def test_clean_examples():
    m = np.zeros((7, 7), dtype=bool)
    m[3, 3] = True
    assert not morphological_clean(m).any()
    full = np.ones((5, 5), dtype=bool)
    np.testing.assert_array_equal(morphological_clean(full), full)
    bar = np.zeros((9, 15), dtype=bool)
    bar[3:6, :] = True
    bar[3:6, 7] = False
    out = morphological_clean(bar, passes=1)
    assert out[4, 7]


def test_clean_nearly_settles_after_two_passes():
    # a third pass may still creep along diagonal edges, but only by a handful of pixels
    rng = np.random.default_rng(0)
    exact = 0
    for _ in range(10):
        s = generate_sample(rng)
        mask = threshold_crack_pixels(gradient_magnitude_orientation(directional_gradients(s.image)))
        two = morphological_clean(mask, passes=2)
        changed = int((morphological_clean(two, passes=1) != two).sum())
        assert changed <= 0.005 * two.sum()
        exact += changed == 0
    assert exact >= 5


@pytest.mark.parametrize("size,kept", [(19, False), (20, True)])
def test_component_size_boundary(size, kept):
    m = np.zeros((5, 30), dtype=bool)
    m[2, :size] = True
    assert remove_small_components(m, 20).any() == kept


@given(arrays(bool, (12, 12)), st.integers(1, 10))
def test_components_match_flood_fill(mask, min_px):
    want = np.zeros_like(mask)
    for comp in oracles.flood_fill_components(mask):
        if len(comp) >= min_px:
            for r, c in comp:
                want[r, c] = True
    got = remove_small_components(mask, min_px)
    np.testing.assert_array_equal(got, want)
    assert not (got & ~mask).any()


def _speck(r, c, size=1):
    px = np.array([(r + i, c + j) for i in range(size) for j in range(size)])
    return px


def _region(label, px):
    return CrackRegion(label, px, (float(px[:, 1].mean()), float(px[:, 0].mean())), len(px))


def test_region_rule_examples():
    a, b = _region(1, _speck(10, 10, 2)), _region(2, _speck(10, 14, 2))
    assert remove_noise_by_region([a, b], t_d=30, t_a=40) == []
    big = _region(3, _speck(20, 20, 8))
    near = _region(4, _speck(20, 30))
    kept = remove_noise_by_region([big, near], 30, 40)
    assert kept == [big]
    assert remove_noise_by_region([near], 30, 40) == [near]


@given(arrays(bool, (16, 16)), st.floats(1, 20), st.floats(1, 20))
def test_region_rule_matches_pairwise_oracle(mask, t_d, t_a):
    regions = crack_regions(mask)
    kept = remove_noise_by_region(regions, t_d, t_a)
    assert len(kept) <= len(regions)
    if len(regions) < 2:
        assert kept == regions
        return
    nearest = oracles.pairwise_min_distance([r.centroid for r in regions])
    want = [r.label for r, d in zip(regions, nearest) if not (r.area < t_a and d < t_d)]
    assert [r.label for r in kept] == want
    assert not (regions_to_mask(kept, mask.shape) & ~mask).any()


def test_region_centroid_and_area():
    mask = np.zeros((5, 5), dtype=bool)
    mask[1, 1:4] = True
    (r,) = crack_regions(mask)
    assert r.area == 3
    assert r.centroid == (2.0, 1.0)


# linking

def test_link_cost_examples():
    assert link_cost((4, 4), (4, 4), 1, 0) == 0
    assert link_cost((0, 0), (3, 4), 1, 0) == 5
    assert link_cost((0, 0), (3, 4), 2, 1) == 11


def _hpath(row, c0, c1):
    return CrackPath(np.array([(row, c) for c in range(c0, c1 + 1)]))


def test_link_collinear_gap():
    paths, bridge = link_cracks([_hpath(10, 0, 20), _hpath(10, 24, 40)])
    assert len(paths) == 1
    cols = paths[0].pixels[:, 1]
    assert list(cols) == list(range(0, 41))
    assert {tuple(p) for p in bridge} == {(10, 21), (10, 22), (10, 23)}


def test_link_far_unchanged():
    a, b = _hpath(10, 0, 20), _hpath(10, 40, 60)
    paths, bridge = link_cracks([a, b])
    assert len(paths) == 2 and len(bridge) == 0


def test_link_picks_nearest():
    base = _hpath(50, 30, 50)
    # candidates start 9 px above, 5 px below and 2 px right of the base end, pointing away
    up = CrackPath(np.array([(r, 50) for r in range(41, 25, -1)]))
    down = CrackPath(np.array([(r, 50) for r in range(55, 71)]))
    right = _hpath(50, 52, 70)
    cands = [up, down, right]
    costs = [min(link_cost(base.endpoints[1], e, 1, 0.5) for e in c.endpoints) for c in cands]
    assert costs == [9.5, 5.5, 2.5]
    paths, bridge = link_cracks([base] + cands, LinkingParams(max_link_distance=10))
    assert len(paths) == 3
    np.testing.assert_array_equal(paths[0].pixels[:, 1], np.arange(30, 71))
    assert [tuple(p) for p in bridge] == [(50, 51)]


@given(st.lists(st.tuples(st.integers(0, 60), st.integers(0, 40), st.integers(3, 15)), min_size=1, max_size=6))
def test_linking_monotone(specs):
    paths = [_hpath(r, c, c + n) for r, c, n in specs]
    covered = {tuple(p) for path in paths for p in path.pixels}
    out, _ = link_cracks(paths)
    assert len(out) <= len(paths)
    assert covered <= {tuple(p) for path in out for p in path.pixels}


def test_linking_params_validation():
    with pytest.raises(InvalidInputError):
        LinkingParams(window=10, max_link_distance=20)


# lengths, widths and statistics

def test_straight_path_lengths():
    assert path_length_px(np.array([(0, c) for c in range(101)])) == pytest.approx(100.0)
    diag = np.array([(k, k) for k in range(101)])
    assert path_length_px(diag) == pytest.approx(100 * math.sqrt(2), rel=1e-9)
    assert path_length_px(np.array([(3, 3)])) == 0.0


def test_statistics_examples():
    s = crack_statistics([_hpath(0, 0, 100)], scale=1e-3)
    assert s["total_length_m"] == s["longest_m"] == s["shortest_m"] == pytest.approx(0.1)
    s = crack_statistics([_hpath(0, 0, 100), _hpath(20, 0, 50)], scale=1e-3)
    assert s["count"] == 2
    assert s["total_length_m"] == pytest.approx(0.15)
    assert s["longest_m"] == pytest.approx(0.1)
    assert s["shortest_m"] == pytest.approx(0.05)
    assert s["shortest_xy"] == pytest.approx((0.0255, 0.0205))
    e = crack_statistics([])
    assert e["empty"] and e["total_length_m"] == 0


def test_width_bar_and_line():
    mask = np.zeros((20, 60), dtype=bool)
    mask[8:11, 5:55] = True
    p = estimate_width(_hpath(9, 5, 54), mask)
    assert all(w == pytest.approx(3e-3) for _, _, w in p.width_samples)
    mask = np.zeros((20, 60), dtype=bool)
    mask[9, 5:55] = True
    p = estimate_width(_hpath(9, 5, 54), mask)
    assert p.max_width_m == pytest.approx(1e-3) and p.min_width_m == pytest.approx(1e-3)


def test_width_wedge():
    n = 81
    heights = oracles.perpendicular_runs_wedge(n, 1, 9)
    mask = np.zeros((30, n + 10), dtype=bool)
    for k, h in enumerate(heights):
        top = 15 - (h - 1) // 2
        mask[top : top + h, 5 + k] = True
    p = estimate_width(_hpath(15, 5, 5 + n - 1), mask)
    sampled = [heights[k] for k in range(0, n, 5)]
    assert p.max_width_m == pytest.approx(9e-3)
    assert p.mean_width_m == pytest.approx(np.mean(sampled) * 1e-3)
    assert abs(p.mean_width_m - 5e-3) <= 1e-3


def test_skeleton_of_bar_is_single_path():
    mask = np.zeros((20, 60), dtype=bool)
    mask[8:11, 5:55] = True
    (p,) = skeleton_paths(mask)
    assert abs(p.length_px - 49) <= 3


# pipeline

def test_pipeline_on_sample():
    s = generate_sample(np.random.default_rng(3))
    det = detect_cracks(s.image)
    ev = evaluate_mask(det.mask, s.truth)
    assert ev["precision"] >= 0.85 and ev["recall"] >= 0.85


def test_blank_and_minimal_images():
    det = detect_cracks(GrayImage(np.full((50, 50), 180, dtype=np.uint8)))
    assert det.stats["empty"] and not det.mask.any()
    det = detect_cracks(GrayImage(np.arange(9, dtype=np.uint8).reshape(3, 3) * 20))
    assert det.mask.shape == (3, 3)


def test_gray_conversion_and_io(tmp_path):
    rgb = np.zeros((4, 4, 3), dtype=np.uint8)
    rgb[..., 0] = 100
    rgb[..., 1] = 200
    g = to_gray(rgb)
    assert g[0, 0] == pytest.approx(0.299 * 100 + 0.587 * 200, abs=0.5)
    arr = (np.arange(48, dtype=np.uint8) * 5).reshape(6, 8)
    save_gray(arr, tmp_path / "a.png")
    back = load_image(tmp_path / "a.png")
    np.testing.assert_array_equal(back.intensities, arr)


# georeferencing

FP = CameraFootprint(along_m=0.8, across_m=1.6, offset_m=(0.2, 0.0), cols=80, rows=160)


def test_georef_centre_and_corner():
    pose = Pose2D(3.0, 2.0, math.pi / 2)
    centre = georeference((40, 80), pose, FP)
    assert centre == pytest.approx((3.0, 2.2))
    corner = georeference((0, 0), pose, FP)
    # back-left corner in the body frame is (0.2 - 0.4, +0.8); heading rotates it by 90 degrees
    assert corner == pytest.approx((3.0 - 0.8, 2.0 - 0.2))
    with pytest.raises(InvalidInputError):
        georeference((81, 0), pose, FP)
    np.testing.assert_allclose(deck_to_pixel(corner, pose, FP), (0, 0), atol=1e-9)


def test_shared_marker_in_overlapping_tiles():
    sigma = 0.01
    rng = np.random.default_rng(2)
    marker = np.array([5.5, 1.1])
    true_a, true_b = Pose2D(5.0, 1.0, 0.3), Pose2D(5.0 + 0.6096 * math.cos(0.3), 1.0 + 0.6096 * math.sin(0.3), 0.3)
    px_a = deck_to_pixel(marker, true_a, FP)
    px_b = deck_to_pixel(marker, true_b, FP)
    for _ in range(50):
        # pose errors of norm sigma in random directions
        ea, eb = (sigma * np.array([math.cos(u), math.sin(u)]) for u in rng.uniform(0, 2 * math.pi, 2))
        est_a = Pose2D(true_a.x + ea[0], true_a.y + ea[1], 0.3)
        est_b = Pose2D(true_b.x + eb[0], true_b.y + eb[1], 0.3)
        ga, gb = georeference(px_a, est_a, FP), georeference(px_b, est_b, FP)
        np.testing.assert_allclose(ga - gb, ea - eb, atol=1e-12)
        assert np.linalg.norm(ga - gb) <= 2 * sigma + 1e-12


def test_mosaic_crops_overlap():
    fp = CameraFootprint(along_m=1.0, across_m=1.0, cols=100, rows=100)
    path = _hpath(50, 0, 99)
    path.scale = 0.01
    tiles = [Tile("a", Pose2D(0.5, 0.5), [path]), Tile("b", Pose2D(1.2, 0.5), [path])]
    cmap = assemble_crack_map(tiles, fp, (0, 0, 5, 1))
    assert cmap.total_length_m == pytest.approx(1.7, abs=0.03)
    for e in cmap.entries:
        assert (e.polyline[:, 0] >= 0).all() and (e.polyline[:, 0] <= 5).all()
