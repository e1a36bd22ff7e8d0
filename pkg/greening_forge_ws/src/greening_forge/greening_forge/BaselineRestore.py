from dataclasses import dataclass
from typing import Callable, List, Optional
import logging

import cv2
import numpy as np

from greening_forge.Errors import DomainError
from greening_forge.Raster import BLUE, GREEN, RED, GrayField, RasterImage, require_same_shape

logger = logging.getLogger(__name__)

HISTOGRAM_BINS = 256
MIN_REFERENCE_PIXELS = 256
MIN_ANNULUS_WIDTH = 4


@dataclass(frozen=True, eq=False)
class RegionPair:
    """
    One defect component and the clean pixels its colours are matched against.

    Attributes:
        defect_region (np.ndarray): bool H x W, a single 8-connected mask component.
        reference_region (np.ndarray): bool H x W, disjoint from every mask pixel.
    """

    defect_region: np.ndarray
    reference_region: np.ndarray

    def __post_init__(self) -> None:
        if np.any(self.defect_region & self.reference_region):
            raise DomainError("defect and reference regions overlap")


def _annulus(component: np.ndarray, defects: np.ndarray, width: int) -> np.ndarray:
    size = 2 * width + 1
    kernel = cv2.getStructuringElement(cv2.MORPH_ELLIPSE, (size, size))
    grown = cv2.dilate(component.astype(np.uint8), kernel) > 0
    return grown & ~defects


def build_region_pairs(mask: GrayField, annulus_width: int,
                       reference_mask: Optional[GrayField] = None) -> List[RegionPair]:
    """

    Split a mask into components and choose a reference region for each.

    Without `reference_mask` the reference is an annulus of `annulus_width`
    pixels around the component, excluding all mask pixels. An annulus with
    fewer than 256 pixels is doubled in width until it has enough or spans
    the image. A manual `reference_mask` is shared by all components.

    Args:
        mask: Binary defect mask.
        annulus_width: Initial annulus width in pixels, >= 4.
        reference_mask: Optional hand-picked clean region.

    Returns:
        List[RegionPair]: One pair per 8-connected component, in label order.
    """
    if annulus_width < MIN_ANNULUS_WIDTH:
        raise DomainError(f"annulus width must be >= {MIN_ANNULUS_WIDTH}, got {annulus_width}")
    defects = mask.values > 0.5
    count, labels = cv2.connectedComponents(defects.astype(np.uint8), connectivity=8)

    manual = None
    if reference_mask is not None:
        require_same_shape(mask, reference_mask)
        manual = (reference_mask.values > 0.5) & ~defects
        if not manual.any():
            raise DomainError("reference mask has no pixels outside the defect mask")

    span = max(mask.shape)
    pairs = []
    for label in range(1, count):
        component = labels == label
        if manual is not None:
            pairs.append(RegionPair(component, manual))
            continue

        width = annulus_width
        reference = _annulus(component, defects, width)
        while reference.sum() < MIN_REFERENCE_PIXELS and width < span:
            width = min(width * 2, span)
            reference = _annulus(component, defects, width)
        if not reference.any():
            raise DomainError(f"component {label} has no clean pixels to match against")
        if width != annulus_width:
            logger.debug("component %d: annulus widened to %d px", label, width)
        pairs.append(RegionPair(component, reference))
    return pairs


def _cdf(values: np.ndarray) -> np.ndarray:
    hist, _ = np.histogram(values, bins=HISTOGRAM_BINS, range=(0.0, 1.0))
    return np.concatenate([[0.0], np.cumsum(hist) / float(values.size)])


def _matching_map(source: np.ndarray, reference: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    """Monotone map that carries the source distribution onto the reference one."""
    if reference.size == 0:
        raise DomainError("histogram matching needs a non-empty reference")
    edges = np.linspace(0.0, 1.0, HISTOGRAM_BINS + 1)
    source_cdf = _cdf(source) if source.size else edges.copy()
    ref_cdf = _cdf(reference)

    # Inverse reference CDF from populated bins only, so its abscissa is strictly increasing
    populated = np.flatnonzero(np.diff(ref_cdf) > 0)
    xp = np.concatenate([[0.0], ref_cdf[populated + 1]])
    fp = np.concatenate([[edges[populated[0]]], edges[populated + 1]])

    def remap(values: np.ndarray) -> np.ndarray:
        quantile = np.interp(values, edges, source_cdf)
        return np.clip(np.interp(quantile, xp, fp), 0.0, 1.0)
    return remap


def match_histogram(values: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """
    Remap `values` so their 256-bin histogram follows that of `reference`.

    Both CDFs are linearly interpolated between bin edges; the mapping is monotone.
    """
    values = np.asarray(values, dtype=np.float64)
    return _matching_map(values.ravel(), np.asarray(reference, dtype=np.float64).ravel())(values)


def _feather_alpha(component: np.ndarray, feather: int) -> np.ndarray:
    """1 inside the component, falling linearly to 0 over `feather` pixels outside."""
    outside = (~component).astype(np.uint8)
    distance = cv2.distanceTransform(outside, cv2.DIST_L2, cv2.DIST_MASK_PRECISE)
    alpha = np.clip(1.0 - distance / (feather + 1.0), 0.0, 1.0)
    alpha[component] = 1.0
    return alpha


def histogram_match_region(
    img: RasterImage,
    mask: GrayField,
    annulus_width: int = 16,
    reference_mask: Optional[GrayField] = None,
    feather: int = 3,
    allow_empty: bool = False,
) -> RasterImage:
    """
    Remove greening with classical per-channel histogram matching.

    Each mask component is remapped channel by channel onto the distribution of
    its reference region, then blended outward over `feather` pixels. Where
    feathers of several components meet, the one with the larger blend weight
    wins. Pixels outside the mask and its feather keep their exact input values.

    Args:
        img: Defected image.
        mask: Binary defect mask of the same size.
        annulus_width: Reference annulus width in pixels, >= 4.
        reference_mask: Optional manual reference region.
        feather: Width of the outward linear blend in pixels.
        allow_empty: Return `img` unchanged for an empty mask instead of raising.

    Returns:
        RasterImage: Restored image.
    """
    require_same_shape(img, mask)
    if annulus_width < MIN_ANNULUS_WIDTH:
        raise DomainError(f"annulus width must be >= {MIN_ANNULUS_WIDTH}, got {annulus_width}")
    if feather < 0:
        raise DomainError(f"feather must be >= 0, got {feather}")
    if not np.any(mask.values > 0.5):
        if allow_empty:
            return img
        raise DomainError("histogram matching needs a non-empty mask")

    pairs = build_region_pairs(mask, annulus_width, reference_mask)
    original = img.planes
    result = original.copy()
    best_alpha = np.zeros(img.shape, dtype=np.float64)

    for pair in pairs:
        alpha = _feather_alpha(pair.defect_region, feather)
        update = alpha > best_alpha
        if not update.any():
            continue
        for c in range(3):
            plane = original[c]
            remap = _matching_map(plane[pair.defect_region], plane[pair.reference_region])
            matched = remap(plane[update])
            a = alpha[update]
            result[c][update] = a * matched + (1.0 - a) * plane[update]
        best_alpha[update] = alpha[update]

    logger.info("histogram matched %d defect regions", len(pairs))
    return RasterImage(result)


def green_excess(img: RasterImage, gt: RasterImage, mask: GrayField) -> float:
    """
    Measure the greening left in `img` relative to `gt`.

    Mean over the mask of G - (R + B) / 2 for `img`, minus the same for `gt`.
    """
    require_same_shape(img, gt, mask)
    inside = mask.values > 0.5
    if not inside.any():
        raise DomainError("green excess needs a non-empty mask")

    def excess(image: RasterImage) -> float:
        p = image.planes
        return float(np.mean(p[GREEN][inside] - (p[RED][inside] + p[BLUE][inside]) / 2.0))

    return excess(img) - excess(gt)
