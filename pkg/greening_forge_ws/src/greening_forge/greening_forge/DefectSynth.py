from dataclasses import dataclass
from typing import Optional
import logging

import numpy as np

from greening_forge.Corruption import (
    BASE_TABLE,
    CorruptionTable,
    RingField,
    apply_corruption,
    assign_rings,
    perturb_table,
)
from greening_forge.DefectLayout import DefectLayout
from greening_forge.Errors import DomainError
from greening_forge.LayoutSampler import RasterCache, sample_layout
from greening_forge.Raster import GrayField, RasterImage
from greening_forge.Rasterizer import merge_intensity, rasterize_defect
from greening_forge.SynthConfig import SynthConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SyntheticPair:
    """Defected image, its ground-truth mask and everything that produced them."""

    defected: RasterImage
    mask: GrayField
    layout: DefectLayout
    rings: RingField
    table: CorruptionTable


def derive_image_seed(dataset_seed: int, index: int) -> int:
    """Per-image seed as a pure function of the dataset seed and the entry index."""
    if dataset_seed < 0 or index < 0:
        raise DomainError("dataset seed and index must be non-negative")
    state = np.random.SeedSequence([dataset_seed, index]).generate_state(2, dtype=np.uint32)
    return int(state[0]) << 32 | int(state[1])


def rasterize_layout(layout: DefectLayout, width: int, height: int, config: SynthConfig,
                     rasters: Optional[RasterCache] = None) -> GrayField:
    """Rasterize every defect of a layout and merge them by per-pixel maximum."""
    rasters = rasters or {}
    fields = (
        rasters[spec] if spec in rasters
        else rasterize_defect(spec, width, height, config.boundary_samples, config.noise_knots)
        for spec in layout.specs
    )
    return merge_intensity(fields, width, height)


class DefectSynthesizer:
    """

    Injects greening defects into clean images.

    Holds a SynthConfig and runs the full pipeline: layout sampling,
    rasterization, ring assignment, multiplier jitter and corruption.
    """

    def __init__(self, config: Optional[SynthConfig] = None,
                 base_table: CorruptionTable = BASE_TABLE):
        self.config = config or SynthConfig()
        self.base_table = base_table

    def synthesize(self, clean: RasterImage, seed: int) -> SyntheticPair:
        """
        Produce a defected copy of `clean`.

        Args:
            clean: Undamaged image, at least 64 px in each dimension.
            seed: Image seed; identical (clean, seed, config) give bit-identical output.

        Returns:
            SyntheticPair: Defected image, mask, layout, rings and the jittered table.
        """
        config = self.config
        rng = np.random.default_rng(seed)
        width, height = clean.width, clean.height

        rasters: RasterCache = {}
        layout = sample_layout(rng, width, height, config, rasters)
        intensity = rasterize_layout(layout, width, height, config, rasters)
        rings = assign_rings(intensity, config.band_edges)
        table = perturb_table(self.base_table, rng, config.perturbation)
        defected, mask = apply_corruption(
            clean, rings, table, config.sigma_for(width), config.mask_threshold
        )
        logger.debug(
            "seed %d: %s layout, %d defects, mask covers %d px",
            seed, layout.mix_class.value, len(layout), mask.nonzero_count(),
        )
        return SyntheticPair(defected=defected, mask=mask, layout=layout, rings=rings, table=table)


def synthesize_pair(clean: RasterImage, seed: int,
                    config: Optional[SynthConfig] = None) -> SyntheticPair:
    """Run DefectSynthesizer(config).synthesize(clean, seed) in one call."""
    return DefectSynthesizer(config).synthesize(clean, seed)
