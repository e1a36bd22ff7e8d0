import numpy as np
import pytest
from scipy.ndimage import gaussian_filter

from greening_forge.Raster import RasterImage, save_image


def smooth_image(seed: int, width: int, height: int,
                 low: float = 0.2, high: float = 0.8) -> RasterImage:
    """Photograph-like test image: smoothed noise rescaled into [low, high] per channel."""
    rng = np.random.default_rng(seed)
    planes = np.empty((3, height, width))
    for c in range(3):
        field = gaussian_filter(rng.normal(size=(height, width)), sigma=4.0)
        field = (field - field.min()) / (field.max() - field.min())
        planes[c] = low + (high - low) * field
    return RasterImage(planes)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def clean_image():
    return smooth_image(7, 128, 96)


@pytest.fixture
def clean_dir(tmp_path):
    """Three clean PNGs plus one file that is not an image."""
    directory = tmp_path / "clean_src"
    directory.mkdir()
    for i, name in enumerate(("a", "b", "c")):
        save_image(smooth_image(100 + i, 96, 80), directory / f"{name}.png")
    (directory / "notes.txt").write_text("not an image\n")
    return directory
