from dataclasses import dataclass
from typing import Dict

import numpy as np

from greening_forge.Errors import DomainError
from greening_forge.Raster import GrayField, RasterImage, require_same_shape

DEFAULT_THRESHOLD = 0.1
DEFAULT_FREQUENCY_WEIGHT = 0.1
STANDARD_WEIGHTS = (0.1, 0.5)

# Named loss variants: defect pixels weighted 10x, 2x, or like every other pixel
LOSS_VARIANTS: Dict[str, float] = {
    "loss10": 0.1,
    "loss2": 0.5,
    "original": 1.0,
}


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    """
    Per-pixel loss weight W(x, y): 1.0 on defect pixels, w elsewhere.

    Attributes:
        values (GrayField): Weights, shared by the three channels of a pixel.
        w (float): Weight of non-defect pixels.
        t (float): Threshold on channel-max |input - gt| that marks a defect pixel.
    """

    values: GrayField
    w: float
    t: float


@dataclass(frozen=True)
class LossReport:
    """Spatial and frequency terms with their weighted sum."""

    spatial: float
    frequency: float
    frequency_weight: float = DEFAULT_FREQUENCY_WEIGHT

    @property
    def combined(self) -> float:
        """Spatial term plus the weighted frequency term."""
        return self.spatial + self.frequency_weight * self.frequency

    def to_dict(self) -> Dict[str, float]:
        """Return the three terms as JSON-ready data."""
        return {
            "spatial": self.spatial,
            "frequency": self.frequency,
            "combined": self.combined,
            "frequency_weight": self.frequency_weight,
        }


def _channel_max_difference(a: RasterImage, b: RasterImage) -> np.ndarray:
    return np.abs(a.planes - b.planes).max(axis=0)


def defect_mask(input: RasterImage, gt: RasterImage, t: float = DEFAULT_THRESHOLD) -> GrayField:
    """

    Before/after defect detection: 1 where channel-max |input - gt| > t.

    The comparison is strict, so a difference of exactly t is not a defect.
    """
    require_same_shape(input, gt)
    if not 0 < t < 1:
        raise DomainError(f"threshold t must be in (0, 1), got {t}")
    return GrayField((_channel_max_difference(input, gt) > t).astype(np.float64))


def weight_matrix(input: RasterImage, gt: RasterImage, w: float, t: float = DEFAULT_THRESHOLD,
                  strict_weights: bool = False) -> WeightMatrix:
    """
    Build W(x, y) from an input/ground-truth pair.

    Args:
        input: Defected network input.
        gt: Clean ground truth.
        w: Weight of non-defect pixels, in (0, 1].
        t: Defect threshold, in (0, 1).
        strict_weights: Restrict w to the standard values 0.1 and 0.5.

    Returns:
        WeightMatrix: 1.0 where the pixel is a defect, w elsewhere.
    """
    if not 0 < w <= 1:
        raise DomainError(f"w must be in (0, 1], got {w}")
    if strict_weights and w not in STANDARD_WEIGHTS:
        raise DomainError(f"strict weights accept w in {STANDARD_WEIGHTS}, got {w}")
    defects = defect_mask(input, gt, t).values > 0
    return WeightMatrix(values=GrayField(np.where(defects, 1.0, w)), w=w, t=t)


def spatial_loss(pred: RasterImage, gt: RasterImage, weights: WeightMatrix) -> float:
    """Compute the weighted L1 (1 / 3HW) * sum over pixels and channels of W * |pred - gt|."""
    require_same_shape(pred, gt, weights.values)
    error = np.abs(pred.planes - gt.planes)
    return float((weights.values.values[None, :, :] * error).sum() / error.size)


def frequency_loss(pred: RasterImage, gt: RasterImage) -> float:
    """
    L1 distance of the spectra: (1 / 3HW) * sum |F(pred) - F(gt)|.

    F is the unnormalized forward 2-D DFT of each channel and |.| the complex
    modulus.
    """
    require_same_shape(pred, gt)
    spectrum = np.fft.fft2(pred.planes - gt.planes, axes=(-2, -1))
    return float(np.abs(spectrum).sum() / pred.planes.size)


def combined_loss(
    pred: RasterImage,
    gt: RasterImage,
    input: RasterImage,
    w: float = STANDARD_WEIGHTS[0],
    t: float = DEFAULT_THRESHOLD,
    freq_weight: float = DEFAULT_FREQUENCY_WEIGHT,
) -> LossReport:
    """Add `freq_weight` times the frequency loss to the weighted spatial loss."""
    require_same_shape(pred, gt, input)
    weights = weight_matrix(input, gt, w, t)
    return LossReport(
        spatial=spatial_loss(pred, gt, weights),
        frequency=frequency_loss(pred, gt),
        frequency_weight=freq_weight,
    )


def combined_loss_gradient(
    pred: RasterImage,
    gt: RasterImage,
    input: RasterImage,
    w: float = STANDARD_WEIGHTS[0],
    t: float = DEFAULT_THRESHOLD,
    freq_weight: float = DEFAULT_FREQUENCY_WEIGHT,
) -> np.ndarray:
    """
    Compute the analytic subgradient of the combined loss with respect to `pred`.

    Returns:
        np.ndarray: 3 x H x W array. Kinks (pred == gt, empty spectral bins)
        take the zero subgradient.
    """
    require_same_shape(pred, gt, input)
    weights = weight_matrix(input, gt, w, t).values.values
    error = pred.planes - gt.planes
    n = error.size

    spatial = weights[None, :, :] * np.sign(error) / n

    spectrum = np.fft.fft2(error, axes=(-2, -1))
    modulus = np.abs(spectrum)
    phase = np.divide(spectrum, modulus, out=np.zeros_like(spectrum), where=modulus > 0)
    height, width = pred.shape
    frequency = np.real(np.fft.ifft2(phase, axes=(-2, -1))) * (height * width) / n

    return spatial + freq_weight * frequency
