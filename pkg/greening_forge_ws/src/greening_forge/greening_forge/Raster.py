from dataclasses import dataclass
from pathlib import Path
from typing import Union
import logging
import math

import cv2
import numpy as np
from scipy.ndimage import correlate1d

from greening_forge.Errors import DomainError, FormatError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

RED, GREEN, BLUE = 0, 1, 2
CHANNEL_NAMES = ("red", "green", "blue")


@dataclass(frozen=True, eq=False)
class RasterImage:
    """
    Planar RGB image with float samples in [0, 1].

    Samples are clamped on construction, so every operation that builds a
    RasterImage returns in-range data.

    Attributes:
        planes (np.ndarray): 3 x height x width float64 array, planes ordered R, G, B.
    """

    planes: np.ndarray

    def __post_init__(self) -> None:
        planes = np.asarray(self.planes, dtype=np.float64)
        if planes.ndim != 3 or planes.shape[0] != 3:
            raise DomainError(f"expected 3 x H x W planes, got shape {planes.shape}")
        if planes.shape[1] < 1 or planes.shape[2] < 1:
            height, width = planes.shape[1:]
            raise DomainError(f"image must be at least 1x1, got {width}x{height}")
        planes = np.clip(planes, 0.0, 1.0)
        planes.setflags(write=False)
        object.__setattr__(self, "planes", planes)

    @property
    def height(self) -> int:
        """Image height in pixels."""
        return self.planes.shape[1]

    @property
    def width(self) -> int:
        """Image width in pixels."""
        return self.planes.shape[2]

    @property
    def shape(self) -> tuple[int, int]:
        """(height, width) of every plane."""
        return self.planes.shape[1], self.planes.shape[2]

    def plane(self, channel: int) -> np.ndarray:
        """Return one plane; 0 = red, 1 = green, 2 = blue."""
        return self.planes[channel]

    @classmethod
    def from_hwc(cls, array: np.ndarray) -> "RasterImage":
        """Build from an H x W x 3 array in RGB order."""
        array = np.asarray(array, dtype=np.float64)
        if array.ndim != 3 or array.shape[2] != 3:
            raise DomainError(f"expected H x W x 3 array, got shape {array.shape}")
        return cls(np.moveaxis(array, 2, 0))

    @classmethod
    def filled(cls, width: int, height: int, rgb: tuple[float, float, float]) -> "RasterImage":
        """Build an image of one uniform colour."""
        planes = np.empty((3, height, width), dtype=np.float64)
        for c in range(3):
            planes[c] = rgb[c]
        return cls(planes)

    def to_hwc(self) -> np.ndarray:
        """Return an H x W x 3 copy in RGB order."""
        return np.moveaxis(self.planes, 0, 2).copy()


@dataclass(frozen=True, eq=False)
class GrayField:
    """

    Single-plane float field (intensity, mask or weights).

    Values are not clamped; their meaning is set by whichever operation
    produced the field.

    Attributes:
        values (np.ndarray): height x width float64 array.
    """

    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise DomainError(f"expected H x W field, got shape {values.shape}")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def height(self) -> int:
        """Field height in pixels."""
        return self.values.shape[0]

    @property
    def width(self) -> int:
        """Field width in pixels."""
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        """(height, width) of the field."""
        return self.values.shape

    @classmethod
    def zeros(cls, width: int, height: int) -> "GrayField":
        """Build an all-zero field."""
        return cls(np.zeros((height, width), dtype=np.float64))

    def nonzero_count(self) -> int:
        """Count the pixels with a non-zero value."""
        return int(np.count_nonzero(self.values))


def require_same_shape(*items) -> None:
    """Raise DomainError unless every image/field shares one (height, width)."""
    shapes = {item.shape for item in items}
    if len(shapes) != 1:
        raise DomainError(f"dimension mismatch: {sorted(shapes)}")


########## File I/O ##########

def load_image(path: PathLike) -> RasterImage:
    """
    Decode a PNG or JPEG file into a RasterImage.

    Args:
        path: Image file to read.

    Returns:
        RasterImage: 8-bit samples scaled by 1/255, 16-bit samples by 1/65535.
        Grayscale files are replicated into all three planes and alpha is dropped.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"image not found: {path}")
    data = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if data is None:
        raise OSError(f"cannot decode image: {path}")

    if data.dtype == np.uint8:
        scale = 255.0
    elif data.dtype == np.uint16:
        scale = 65535.0
    else:
        raise FormatError(f"unsupported sample type {data.dtype} in {path}")

    if data.ndim == 2:
        rgb = np.repeat(data[:, :, None], 3, axis=2)
    elif data.ndim == 3 and data.shape[2] in (3, 4):
        # OpenCV decodes to BGR(A)
        rgb = data[:, :, 2::-1]
    elif data.ndim == 3 and data.shape[2] == 1:
        rgb = np.repeat(data, 3, axis=2)
    else:
        raise FormatError(f"unsupported channel layout {data.shape} in {path}")

    return RasterImage.from_hwc(rgb.astype(np.float64) / scale)


def _quantize(values: np.ndarray, depth: int) -> np.ndarray:
    if depth == 8:
        return np.round(values * 255.0).astype(np.uint8)
    if depth == 16:
        return np.round(values * 65535.0).astype(np.uint16)
    raise DomainError(f"bit depth must be 8 or 16, got {depth}")


def _write_png(path: Path, data: np.ndarray) -> None:
    if not path.parent.is_dir():
        raise FileNotFoundError(f"output directory does not exist: {path.parent}")
    try:
        ok = cv2.imwrite(str(path), data)
    except cv2.error as exc:
        raise OSError(f"cannot write image {path}: {exc}") from exc
    if not ok:
        raise OSError(f"cannot write image: {path}")


def save_image(img: RasterImage, path: PathLike, depth: int = 8) -> None:
    """
    Write a lossless PNG at the requested bit depth.

    Args:
        img: Image to write.
        path: Destination file; its parent directory must exist.
        depth: 8 or 16 bits per sample.
    """
    path = Path(path)
    data = _quantize(img.to_hwc(), depth)
    _write_png(path, np.ascontiguousarray(data[:, :, ::-1]))
    logger.debug("wrote %s (%dx%d, %d-bit)", path, img.width, img.height, depth)


def save_mask(mask: GrayField, path: PathLike) -> None:
    """Write a mask as a single-channel 8-bit PNG: 255 = defect, 0 = clean."""
    data = np.where(mask.values > 0.5, 255, 0).astype(np.uint8)
    _write_png(Path(path), data)


def load_mask(path: PathLike) -> GrayField:
    """Read a mask PNG (any decodable image) and binarize it at mid-scale."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"mask not found: {path}")
    data = cv2.imread(str(path), cv2.IMREAD_GRAYSCALE)
    if data is None:
        raise OSError(f"cannot decode mask: {path}")
    return GrayField((data >= 128).astype(np.float64))


########## Filtering ##########

def gaussian_kernel(sigma: float) -> np.ndarray:
    """
    Build a normalized 1-D Gaussian kernel truncated at radius ceil(3 * sigma).

    Args:
        sigma: Standard deviation in pixels, > 0.

    Returns:
        np.ndarray: Odd-length kernel summing to 1.
    """
    if not sigma > 0:
        raise DomainError(f"sigma must be > 0, got {sigma}")
    radius = max(1, math.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return kernel / kernel.sum()


def blur_array(values: np.ndarray, sigma: float) -> np.ndarray:
    """Blur a 2-D array with a separable Gaussian and edge replication."""
    kernel = gaussian_kernel(sigma)
    out = correlate1d(np.asarray(values, dtype=np.float64), kernel, axis=0, mode="nearest")
    return correlate1d(out, kernel, axis=1, mode="nearest")


def gaussian_blur(field: GrayField, sigma: float) -> GrayField:
    """
    Blur a GrayField with a separable, 3-sigma truncated Gaussian.

    Borders replicate the edge sample, so constant fields stay constant.
    """
    return GrayField(blur_array(field.values, sigma))
