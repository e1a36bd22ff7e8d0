import numpy as np
import pytest
from scipy.ndimage import distance_transform_edt

from conftest import smooth_image
from greening_forge.BaselineRestore import (
    build_region_pairs,
    green_excess,
    histogram_match_region,
    match_histogram,
)
from greening_forge.Errors import DomainError
from greening_forge.Raster import GrayField, RasterImage


def disk_mask(shape, centers, radius):
    yy, xx = np.mgrid[0:shape[0], 0:shape[1]]
    mask = np.zeros(shape)
    for cy, cx in centers:
        mask[(yy - cy) ** 2 + (xx - cx) ** 2 <= radius ** 2] = 1.0
    return GrayField(mask)


def greened(clean, mask):
    """Hand-made greening: green lifted, red and blue damped inside the mask."""
    planes = clean.planes.copy()
    inside = mask.values > 0
    planes[0][inside] *= 0.6
    planes[1][inside] *= 1.3
    planes[2][inside] *= 0.6
    return RasterImage(planes)


@pytest.fixture
def scene():
    clean = smooth_image(21, 96, 96, low=0.35, high=0.65)
    mask = disk_mask(clean.shape, [(30, 30), (66, 70)], 10)
    return clean, greened(clean, mask), mask


def test_match_histogram_moves_onto_reference(rng):
    values = rng.uniform(0.0, 0.5, 5000)
    reference = rng.uniform(0.5, 1.0, 5000)
    matched = match_histogram(values, reference)
    assert matched.min() >= 0.49 and matched.max() <= 1.0
    assert matched.mean() == pytest.approx(reference.mean(), abs=0.01)
    assert np.percentile(matched, 25) == pytest.approx(np.percentile(reference, 25), abs=0.01)


def test_match_histogram_is_monotone(rng):
    values = np.sort(rng.uniform(0.0, 1.0, 2000))
    reference = rng.beta(2.0, 5.0, 3000)
    matched = match_histogram(values, reference)
    assert np.all(np.diff(matched) >= 0.0)


def test_match_histogram_handles_sparse_reference():
    matched = match_histogram(np.linspace(0.0, 1.0, 11), np.array([0.2, 0.2, 0.7]))
    assert np.all(np.diff(matched) >= 0.0)
    assert matched.min() >= 0.0 and matched.max() <= 1.0


def test_match_histogram_needs_reference():
    with pytest.raises(DomainError):
        match_histogram(np.array([0.5]), np.array([]))


def test_region_pairs_are_disjoint_and_large_enough(scene):
    _, _, mask = scene
    pairs = build_region_pairs(mask, annulus_width=4)
    assert len(pairs) == 2
    inside = mask.values > 0
    for pair in pairs:
        assert not np.any(pair.reference_region & inside)
        assert pair.reference_region.sum() >= 256
        assert np.all(inside[pair.defect_region])


def test_annulus_widens_when_clean_border_is_thin():
    mask = np.ones((40, 40))
    mask[:, 36:] = 0
    pairs = build_region_pairs(GrayField(mask), annulus_width=4)
    # Only 160 clean pixels exist; the annulus grows until it spans the image and keeps them all
    assert pairs[0].reference_region.sum() == 160


def test_region_pair_errors(scene):
    _, _, mask = scene
    with pytest.raises(DomainError):
        build_region_pairs(mask, annulus_width=3)
    with pytest.raises(DomainError):
        build_region_pairs(GrayField(np.ones((20, 20))), annulus_width=4)


def test_manual_reference_region(scene):
    _, _, mask = scene
    reference = np.zeros(mask.shape)
    reference[80:, :] = 1
    pairs = build_region_pairs(mask, 16, GrayField(reference))
    assert all(pair.reference_region.sum() == 16 * 96 for pair in pairs)
    with pytest.raises(DomainError):
        build_region_pairs(mask, 16, mask)


def test_baseline_removes_most_of_the_greening(scene):
    clean, defected, mask = scene
    restored = histogram_match_region(defected, mask)
    before = green_excess(defected, clean, mask)
    after = green_excess(restored, clean, mask)
    assert before > 0.1
    assert abs(after) <= 0.5 * before


def test_baseline_leaves_far_pixels_bit_identical(scene):
    _, defected, mask = scene
    restored = histogram_match_region(defected, mask, feather=3)
    distance = distance_transform_edt(mask.values == 0)
    far = distance >= 4.0
    assert np.array_equal(restored.planes[:, far], defected.planes[:, far])
    inside = mask.values > 0
    assert not np.array_equal(restored.planes[:, inside], defected.planes[:, inside])


def test_baseline_feather_blends_partially(scene):
    _, defected, mask = scene
    restored = histogram_match_region(defected, mask, feather=3)
    distance = distance_transform_edt(mask.values == 0)
    ring = (distance > 0.5) & (distance <= 1.0)
    changed = np.abs(restored.planes - defected.planes).max(axis=0)
    assert np.any(changed[ring] > 0)


def test_empty_mask(scene):
    _, defected, _ = scene
    empty = GrayField.zeros(defected.width, defected.height)
    with pytest.raises(DomainError):
        histogram_match_region(defected, empty)
    assert histogram_match_region(defected, empty, allow_empty=True) is defected


def test_green_excess(scene):
    clean, defected, mask = scene
    assert green_excess(clean, clean, mask) == 0.0
    assert green_excess(defected, clean, mask) > 0.0
    with pytest.raises(DomainError):
        green_excess(clean, clean, GrayField.zeros(clean.width, clean.height))
