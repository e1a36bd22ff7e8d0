from typing import Dict, List, Optional
import logging
import math

import numpy as np

from greening_forge.DefectLayout import DefectKind, DefectLayout, DefectSpec, MixClass
from greening_forge.Errors import DomainError
from greening_forge.Raster import GrayField
from greening_forge.Rasterizer import footprint_bounds, footprint_fraction, rasterize_defect
from greening_forge.SynthConfig import SynthConfig

logger = logging.getLogger(__name__)

MIN_IMAGE_SIZE = 64
MAX_SHRINK_STEPS = 100


def _draw_seed(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**31 - 1))


def _sample_mix(rng: np.random.Generator, probabilities) -> MixClass:
    u = rng.random()
    p_spots, p_large, _ = probabilities
    if u < p_spots:
        return MixClass.SPOTS_ONLY
    if u < p_spots + p_large:
        return MixClass.LARGE_ONLY
    return MixClass.BOTH


def sample_spot(rng: np.random.Generator, width: int, height: int,
                config: SynthConfig) -> DefectSpec:
    """Draw one spot with a diameter uniform on a share of the width and a center in frame."""
    diameter = rng.uniform(*config.spot_diameter_range) * width
    aspect = rng.uniform(*config.spot_aspect_range)
    major = diameter / 2.0
    minor = major * aspect
    axes = (major, minor) if rng.random() < 0.5 else (minor, major)
    center = (rng.uniform(0.0, width - 1), rng.uniform(0.0, height - 1))
    return DefectSpec(
        kind=DefectKind.SPOT,
        center=center,
        semi_axes=axes,
        boundary_noise_seed=_draw_seed(rng),
        boundary_noise_amplitude=config.noise_amplitude,
    )


def _draw_large(rng: np.random.Generator, width: int, height: int,
                config: SynthConfig) -> DefectSpec:
    # Entry edge: 0 left, 1 right, 2 top, 3 bottom
    side = int(rng.integers(0, 4))
    horizontal = side in (0, 1)
    perp_extent = width if horizontal else height
    par_extent = height if horizontal else width

    offset = rng.uniform(*config.large_offset_range) * perp_extent
    depth = rng.uniform(*config.large_depth_range) * perp_extent
    spread = rng.uniform(*config.large_spread_range) * par_extent
    along = rng.uniform(0.0, par_extent - 1)
    perp_axis = offset + depth

    if side == 0:
        center, axes = (-offset, along), (perp_axis, spread)
    elif side == 1:
        center, axes = (width - 1 + offset, along), (perp_axis, spread)
    elif side == 2:
        center, axes = (along, -offset), (spread, perp_axis)
    else:
        center, axes = (along, height - 1 + offset), (spread, perp_axis)

    half_length, angle = 0.0, 0.0
    if rng.random() < config.linear_core_probability:
        # Liquid seeping in along an edge: the line origin runs roughly parallel to it
        half_length = rng.uniform(*config.linear_core_length_range) * width
        angle = (math.pi / 2.0 if horizontal else 0.0) + rng.uniform(-0.3, 0.3)

    return DefectSpec(
        kind=DefectKind.LARGE,
        center=center,
        semi_axes=axes,
        boundary_noise_seed=_draw_seed(rng),
        boundary_noise_amplitude=config.noise_amplitude,
        core_half_length=half_length,
        core_angle=angle,
    )


RasterCache = Dict[DefectSpec, GrayField]


def _footprint_ok(spec: DefectSpec, width: int, height: int, config: SynthConfig,
                  rasters: Optional[RasterCache]) -> bool:
    limit = config.large_max_fraction
    estimate, slack = footprint_bounds(
        spec, width, height, config.boundary_samples, config.noise_knots
    )
    if estimate + slack <= limit:
        return True
    if estimate - slack > limit:
        return False
    # Within pixel precision of the limit: the rasterized footprint decides
    field = rasterize_defect(spec, width, height, config.boundary_samples, config.noise_knots)
    if footprint_fraction(field) > limit:
        return False
    if rasters is not None:
        rasters[spec] = field
    return True


def sample_large(rng: np.random.Generator, width: int, height: int, config: SynthConfig,
                 rasters: Optional[RasterCache] = None) -> DefectSpec:
    """
    Draw one large-area defect whose origin lies outside the frame.

    Draws are repeated while the in-image footprint exceeds
    `config.large_max_fraction`; after `config.resample_attempts` failures the
    last draw is shrunk by `config.shrink_factor` until it fits. Rasters computed
    to settle a borderline footprint are stored in `rasters` when given.
    """
    spec = None
    for _ in range(config.resample_attempts):
        spec = _draw_large(rng, width, height, config)
        if _footprint_ok(spec, width, height, config, rasters):
            return spec

    for step in range(MAX_SHRINK_STEPS):
        spec = spec.scaled(config.shrink_factor)
        if _footprint_ok(spec, width, height, config, rasters):
            logger.debug("large defect fitted after %d shrink steps", step + 1)
            return spec
    raise DomainError("could not fit a large defect into the footprint limit")


def sample_layout(
    rng: np.random.Generator,
    width: int,
    height: int,
    config: Optional[SynthConfig] = None,
    rasters: Optional[RasterCache] = None,
) -> DefectLayout:
    """
    Sample the defects for one image.

    Args:
        rng: Random stream; the layout is a pure function of its state.
        width: Image width, >= 64.
        height: Image height, >= 64.
        config: Synthesis parameters, defaults when omitted.
        rasters: Optional cache receiving the rasters made while checking large footprints.

    Returns:
        DefectLayout: Spots first, then large defects.
    """
    if width < MIN_IMAGE_SIZE or height < MIN_IMAGE_SIZE:
        raise DomainError(
            f"image must be at least {MIN_IMAGE_SIZE}x{MIN_IMAGE_SIZE}, got {width}x{height}"
        )
    config = config or SynthConfig()

    mix = _sample_mix(rng, config.mix_probabilities)
    specs: List[DefectSpec] = []
    if mix in (MixClass.SPOTS_ONLY, MixClass.BOTH):
        lo, hi = config.spot_count_range
        count = int(rng.integers(lo, hi + 1))
        specs.extend(sample_spot(rng, width, height, config) for _ in range(count))
    if mix in (MixClass.LARGE_ONLY, MixClass.BOTH):
        lo, hi = config.large_count_range
        count = int(rng.integers(lo, hi + 1))
        specs.extend(sample_large(rng, width, height, config, rasters) for _ in range(count))

    logger.debug("sampled %s layout with %d defects", mix.value, len(specs))
    return DefectLayout(specs=tuple(specs), mix_class=mix)
