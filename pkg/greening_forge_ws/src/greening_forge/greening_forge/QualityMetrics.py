from dataclasses import dataclass
from typing import Dict, Optional, Tuple
import logging
import math

import cv2
import numpy as np
from scipy.ndimage import correlate1d

from greening_forge.Errors import DomainError
from greening_forge.Raster import CHANNEL_NAMES, GrayField, RasterImage, require_same_shape

logger = logging.getLogger(__name__)

SSIM_WINDOW = 11
SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2
MS_SSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)
CROPOUT_PADDING = 8


@dataclass(frozen=True)
class MetricsReport:
    """
    Full-reference scores of one restored image.

    Attributes:
        psnr_db (float): Peak signal-to-noise ratio; math.inf for identical images.
        ms_ssim (float): Multi-scale SSIM.
        ssim (float): Single-scale SSIM.
        cropout_ssim (Optional[float]): SSIM restricted to the defect regions,
            when a mask is known.
    """

    psnr_db: float
    ms_ssim: float
    ssim: float
    cropout_ssim: Optional[float] = None

    def to_dict(self) -> Dict[str, object]:
        """Return the scores as JSON-ready data, infinite PSNR as "inf"."""
        out = {
            "psnr_db": "inf" if math.isinf(self.psnr_db) else self.psnr_db,
            "ms_ssim": self.ms_ssim,
            "ssim": self.ssim,
        }
        if self.cropout_ssim is not None:
            out["cropout_ssim"] = self.cropout_ssim
        return out


def psnr(pred: RasterImage, ref: RasterImage) -> float:
    """10 * log10(1 / MSE) over every sample, peak value 1."""
    require_same_shape(pred, ref)
    mse = float(np.mean((pred.planes - ref.planes) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def _window(win_size: int) -> np.ndarray:
    sigma = 1.5 * win_size / SSIM_WINDOW
    x = np.arange(win_size, dtype=np.float64) - (win_size - 1) / 2.0
    kernel = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return kernel / kernel.sum()


def _filter_valid(values: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Average a separable window at every position where it fits inside the plane."""
    r = len(kernel) // 2
    out = correlate1d(values, kernel, axis=0, mode="reflect")
    out = correlate1d(out, kernel, axis=1, mode="reflect")
    h, w = values.shape
    return out[r:h - r, r:w - r]


def _ssim_terms(x: np.ndarray, y: np.ndarray, win_size: int) -> Tuple[float, float]:
    """Mean SSIM and mean contrast-structure term of one plane pair."""
    kernel = _window(win_size)
    mu_x = _filter_valid(x, kernel)
    mu_y = _filter_valid(y, kernel)
    sxx = _filter_valid(x * x, kernel) - mu_x * mu_x
    syy = _filter_valid(y * y, kernel) - mu_y * mu_y
    sxy = _filter_valid(x * y, kernel) - mu_x * mu_y

    cs = (2.0 * sxy + SSIM_C2) / (sxx + syy + SSIM_C2)
    luminance = (2.0 * mu_x * mu_y + SSIM_C1) / (mu_x * mu_x + mu_y * mu_y + SSIM_C1)
    return float(np.mean(luminance * cs)), float(np.mean(cs))


def _check_window(win_size: int, height: int, width: int) -> None:
    if win_size < 1 or win_size % 2 == 0:
        raise DomainError(f"SSIM window must be a positive odd size, got {win_size}")
    if min(height, width) < win_size:
        raise DomainError(f"image {width}x{height} is smaller than the {win_size}px SSIM window")


def _planes_ssim(x: np.ndarray, y: np.ndarray, win_size: int) -> Tuple[float, float]:
    terms = [_ssim_terms(x[c], y[c], win_size) for c in range(x.shape[0])]
    ssim_value = float(np.mean([s for s, _ in terms]))
    cs_value = float(np.mean([c for _, c in terms]))
    return ssim_value, cs_value


def ssim(pred: RasterImage, ref: RasterImage, win_size: int = SSIM_WINDOW) -> float:
    """

    Structural similarity with a Gaussian window (sigma = 1.5 for the 11 px window).

    Computed per RGB plane over the positions where the window fits, then averaged.
    """
    require_same_shape(pred, ref)
    _check_window(win_size, pred.height, pred.width)
    return _planes_ssim(pred.planes, ref.planes, win_size)[0]


def _downsample(planes: np.ndarray) -> np.ndarray:
    """2x2 mean pooling; an odd trailing row or column is dropped."""
    c, h, w = planes.shape
    h2, w2 = h // 2, w // 2
    return planes[:, :h2 * 2, :w2 * 2].reshape(c, h2, 2, w2, 2).mean(axis=(2, 4))


def ms_ssim(pred: RasterImage, ref: RasterImage, scales: int = 5) -> float:
    """
    Multi-scale SSIM.

    Args:
        pred: Restored image.
        ref: Reference image.
        scales: Number of scales, 1-5. Fewer than 5 uses the leading weights,
            renormalized to sum to 1.

    Returns:
        float: prod(cs_j ^ w_j for j < M) * ssim_M ^ w_M, negative terms clamped to 0.
    """
    require_same_shape(pred, ref)
    if not 1 <= scales <= len(MS_SSIM_WEIGHTS):
        raise DomainError(f"scales must be in 1..{len(MS_SSIM_WEIGHTS)}, got {scales}")
    needed = SSIM_WINDOW * 2 ** (scales - 1)
    if min(pred.height, pred.width) < needed:
        raise DomainError(
            f"image {pred.width}x{pred.height} too small for {scales}-scale MS-SSIM "
            f"(needs {needed}px)"
        )

    weights = np.asarray(MS_SSIM_WEIGHTS[:scales])
    weights = weights / weights.sum()

    x, y = pred.planes, ref.planes
    result = 1.0
    for j in range(scales):
        ssim_value, cs_value = _planes_ssim(x, y, SSIM_WINDOW)
        term = ssim_value if j == scales - 1 else cs_value
        result *= max(term, 0.0) ** weights[j]
        if j < scales - 1:
            x, y = _downsample(x), _downsample(y)
    return float(result)


def cropout_ssim(pred: RasterImage, ref: RasterImage, mask: GrayField,
                 padding: int = CROPOUT_PADDING) -> float:
    """
    SSIM over the defect regions only.

    Every 8-connected mask component is cut out with its bounding box grown by
    `padding` pixels (clipped to the frame). Crops narrower than the 11 px window
    use the largest odd window that fits. Scores are averaged weighted by
    component area.
    """
    require_same_shape(pred, ref, mask)
    binary = (mask.values > 0.5).astype(np.uint8)
    count, _, stats, _ = cv2.connectedComponentsWithStats(binary, connectivity=8)
    if count <= 1:
        raise DomainError("cropout SSIM needs a non-empty mask")

    h, w = pred.shape
    total, weight_sum = 0.0, 0.0
    for label in range(1, count):
        left = stats[label, cv2.CC_STAT_LEFT]
        top = stats[label, cv2.CC_STAT_TOP]
        x0 = max(0, left - padding)
        y0 = max(0, top - padding)
        x1 = min(w, left + stats[label, cv2.CC_STAT_WIDTH] + padding)
        y1 = min(h, top + stats[label, cv2.CC_STAT_HEIGHT] + padding)
        area = float(stats[label, cv2.CC_STAT_AREA])

        side = min(y1 - y0, x1 - x0)
        win = min(SSIM_WINDOW, side if side % 2 == 1 else side - 1)
        score, _ = _planes_ssim(pred.planes[:, y0:y1, x0:x1], ref.planes[:, y0:y1, x0:x1], win)
        total += area * score
        weight_sum += area
    logger.debug("cropout SSIM over %d components", count - 1)
    return total / weight_sum


def evaluate_pair(pred: RasterImage, ref: RasterImage, mask: Optional[GrayField] = None,
                  scales: int = 5) -> MetricsReport:
    """All full-reference scores of one pair; cropout SSIM only when a mask is given."""
    return MetricsReport(
        psnr_db=psnr(pred, ref),
        ms_ssim=ms_ssim(pred, ref, scales),
        ssim=ssim(pred, ref),
        cropout_ssim=cropout_ssim(pred, ref, mask) if mask is not None else None,
    )


def outside_change_fraction(restored: RasterImage, input: RasterImage, mask: GrayField,
                            t: float = 1.0 / 255.0) -> float:
    """
    Share of pixels outside the mask that a restoration changed by more than t.

    A pixel counts when its channel-max |restored - input| exceeds t. Returns 0
    when the mask covers the whole image.
    """
    require_same_shape(restored, input, mask)
    outside = mask.values <= 0.5
    n = int(outside.sum())
    if n == 0:
        return 0.0
    changed = np.abs(restored.planes - input.planes).max(axis=0) > t
    return float((changed & outside).sum()) / n


def channel_composition(img: RasterImage,
                        mask: GrayField) -> Dict[str, Dict[str, Optional[float]]]:
    """Mean of each channel inside and outside the mask; None for an empty region."""
    require_same_shape(img, mask)
    inside = mask.values > 0.5
    out: Dict[str, Dict[str, Optional[float]]] = {}
    for region, selector in (("inside", inside), ("outside", ~inside)):
        out[region] = {
            name: float(img.planes[c][selector].mean()) if selector.any() else None
            for c, name in enumerate(CHANNEL_NAMES)
        }
    return out
