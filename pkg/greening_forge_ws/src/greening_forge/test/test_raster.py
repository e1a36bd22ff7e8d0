import cv2
import numpy as np
import pytest

from greening_forge.Errors import DomainError
from greening_forge.Raster import (
    GrayField,
    RasterImage,
    gaussian_blur,
    gaussian_kernel,
    load_image,
    load_mask,
    require_same_shape,
    save_image,
    save_mask,
)


def test_raster_image_clamps_and_is_read_only():
    img = RasterImage(np.array([[[-0.5, 0.5]], [[1.5, 0.25]], [[0.0, 1.0]]]))
    assert img.shape == (1, 2)
    assert img.planes.min() == 0.0 and img.planes.max() == 1.0
    with pytest.raises(ValueError):
        img.planes[0, 0, 0] = 0.3


def test_raster_image_rejects_bad_shapes():
    with pytest.raises(DomainError):
        RasterImage(np.zeros((2, 4, 4)))
    with pytest.raises(DomainError):
        RasterImage(np.zeros((3, 0, 4)))


def test_hwc_conversion_keeps_channel_order():
    hwc = np.zeros((2, 3, 3))
    hwc[..., 1] = 0.75
    img = RasterImage.from_hwc(hwc)
    assert np.all(img.plane(1) == 0.75)
    assert np.array_equal(img.to_hwc(), hwc)


def test_gray_field_copies_its_input():
    data = np.zeros((4, 5))
    field = GrayField(data)
    data[0, 0] = 1.0
    assert field.values[0, 0] == 0.0
    assert field.width == 5 and field.height == 4


def test_require_same_shape():
    require_same_shape(GrayField.zeros(5, 4), RasterImage.filled(5, 4, (0.1, 0.2, 0.3)))
    with pytest.raises(DomainError):
        require_same_shape(GrayField.zeros(5, 4), GrayField.zeros(4, 5))


def test_8_bit_png_holds_exact_levels(tmp_path):
    levels = np.arange(256, dtype=np.float64).reshape(16, 16) / 255.0
    img = RasterImage(np.stack([levels, levels[::-1], levels.T]))
    save_image(img, tmp_path / "img.png")
    assert np.array_equal(load_image(tmp_path / "img.png").planes, img.planes)


def test_16_bit_png(tmp_path):
    values = np.array([[0, 1, 32768, 65535]], dtype=np.float64) / 65535.0
    img = RasterImage(np.stack([values] * 3))
    save_image(img, tmp_path / "img16.png", depth=16)
    data = cv2.imread(str(tmp_path / "img16.png"), cv2.IMREAD_UNCHANGED)
    assert data.dtype == np.uint16
    assert np.array_equal(load_image(tmp_path / "img16.png").planes, img.planes)


def test_png_channels_are_rgb(tmp_path):
    save_image(RasterImage.filled(4, 4, (1.0, 0.0, 0.0)), tmp_path / "red.png")
    data = cv2.imread(str(tmp_path / "red.png"))
    # OpenCV reads BGR, so red lands in the last channel
    assert np.all(data[:, :, 2] == 255) and np.all(data[:, :, 0] == 0)


def test_grayscale_and_alpha_files(tmp_path):
    gray = np.full((6, 7), 51, dtype=np.uint8)
    cv2.imwrite(str(tmp_path / "gray.png"), gray)
    img = load_image(tmp_path / "gray.png")
    assert np.allclose(img.planes, 0.2)

    bgra = np.zeros((6, 7, 4), dtype=np.uint8)
    bgra[..., 0] = 255
    bgra[..., 3] = 10
    cv2.imwrite(str(tmp_path / "alpha.png"), bgra)
    img = load_image(tmp_path / "alpha.png")
    assert np.all(img.plane(2) == 1.0) and np.all(img.plane(0) == 0.0)


def test_load_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_image(tmp_path / "missing.png")
    (tmp_path / "junk.png").write_bytes(b"definitely not a png")
    with pytest.raises(OSError):
        load_image(tmp_path / "junk.png")


def test_save_into_missing_directory(tmp_path):
    with pytest.raises(FileNotFoundError):
        save_image(RasterImage.filled(4, 4, (0.0, 0.0, 0.0)), tmp_path / "nope" / "x.png")


def test_mask_round_trip(tmp_path):
    mask = GrayField(np.eye(8))
    save_mask(mask, tmp_path / "m.png")
    raw = cv2.imread(str(tmp_path / "m.png"), cv2.IMREAD_UNCHANGED)
    assert raw.ndim == 2 and set(np.unique(raw)) == {0, 255}
    assert np.array_equal(load_mask(tmp_path / "m.png").values, mask.values)


def test_gaussian_kernel():
    kernel = gaussian_kernel(1.0)
    assert len(kernel) == 7
    assert kernel.sum() == pytest.approx(1.0)
    assert np.allclose(kernel, kernel[::-1])
    assert len(gaussian_kernel(0.1)) == 3
    with pytest.raises(DomainError):
        gaussian_kernel(0.0)


def test_gaussian_blur_preserves_constants_and_mass():
    constant = GrayField(np.full((20, 30), 0.4))
    assert np.allclose(gaussian_blur(constant, 2.0).values, 0.4)

    impulse = np.zeros((41, 41))
    impulse[20, 20] = 1.0
    blurred = gaussian_blur(GrayField(impulse), 1.5).values
    assert blurred.sum() == pytest.approx(1.0)
    assert blurred[20, 20] == blurred.max()
    assert np.allclose(blurred, blurred.T)


def test_impulse_response_matches_kernel():
    impulse = np.zeros((31, 31))
    impulse[15, 15] = 1.0
    kernel = gaussian_kernel(2.0)
    blurred = gaussian_blur(GrayField(impulse), 2.0).values
    assert blurred[15, 15] == pytest.approx(kernel[len(kernel) // 2] ** 2, abs=1e-12)
    assert blurred.sum() == pytest.approx(1.0, abs=1e-6)


def test_gaussian_blur_is_linear(rng):
    f = rng.random((32, 32))
    g = rng.random((32, 32))
    combined = gaussian_blur(GrayField(0.3 * f - 1.7 * g), 1.3).values
    blurred_f = gaussian_blur(GrayField(f), 1.3).values
    blurred_g = gaussian_blur(GrayField(g), 1.3).values
    separate = 0.3 * blurred_f - 1.7 * blurred_g
    assert np.max(np.abs(combined - separate)) <= 1e-6


@pytest.mark.parametrize("axis", [0, 1])
def test_gaussian_blur_commutes_with_mirroring(rng, axis):
    values = rng.random((32, 27))
    mirrored_first = gaussian_blur(GrayField(np.flip(values, axis)), 2.2).values
    blurred_first = np.flip(gaussian_blur(GrayField(values), 2.2).values, axis)
    assert np.allclose(mirrored_first, blurred_first, atol=1e-12)


def test_16_bit_round_trip_error(tmp_path, rng):
    worst = 0.0
    for i in range(100):
        img = RasterImage(rng.random((3, 9, 13)))
        path = tmp_path / f"r{i}.png"
        save_image(img, path, depth=16)
        worst = max(worst, float(np.max(np.abs(load_image(path).planes - img.planes))))
    assert worst <= 1.0 / 65535
