from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from greening_forge.Errors import DomainError
from greening_forge.Raster import GrayField, RasterImage, blur_array, require_same_shape

# Ring labels from the outermost (lowest intensity) band to the core
RING_LABELS: Tuple[int, ...] = (20, 9, 1, 2, 3, 4, 99)
DEFAULT_BAND_EDGES: Tuple[float, ...] = (0.10, 0.25, 0.45, 0.60, 0.75, 0.92)

RING_NAMES: Dict[int, str] = {
    9: "Outer orange ring",
    1: "Light green ring",
    2: "Middle",
    3: "Middle",
    4: "Dark green second",
    99: "Dark mid",
    20: "Surface",
}


@dataclass(frozen=True)
class CorruptionTable:
    """
    Per-ring channel multipliers p_c.

    Attributes:
        entries (Dict[int, Tuple[float, float, float]]): ring label -> (blue, green, red).
    """

    entries: Dict[int, Tuple[float, float, float]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        entries = {int(k): tuple(float(m) for m in v) for k, v in sorted(self.entries.items())}
        for label, mults in entries.items():
            if label <= 0 or len(mults) != 3:
                raise DomainError(f"bad corruption entry {label}: {mults}")
        object.__setattr__(self, "entries", entries)

    def multipliers_rgb(self, label: int) -> Tuple[float, float, float]:
        """Return the multipliers of one ring in (red, green, blue) order."""
        blue, green, red = self.entries[label]
        return red, green, blue

    def lookup_rgb(self) -> np.ndarray:
        """Dense (max_label + 1) x 3 RGB lookup; unlisted labels, including 0, map to 1."""
        lut = np.ones((max(self.entries) + 1, 3), dtype=np.float64)
        for label in self.entries:
            lut[label] = self.multipliers_rgb(label)
        return lut


BASE_TABLE = CorruptionTable({
    9: (0.6, 0.85, 1.05),
    1: (0.5, 1.2, 0.8),
    2: (0.4, 0.8, 0.6),
    3: (0.4, 0.8, 0.6),
    4: (0.2, 0.6, 0.1),
    99: (0.2, 0.2, 0.1),
    20: (0.4, 0.95, 0.6),
})


@dataclass(frozen=True, eq=False)
class RingField:
    """

    Falloff intensity and corruption-ring label per pixel.

    Attributes:
        intensity (GrayField): Damage intensity in [0, 1], 0 = untouched.
        labels (np.ndarray): Ring label per pixel, 0 where intensity is 0.
    """

    intensity: GrayField
    labels: np.ndarray

    def __post_init__(self) -> None:
        labels = np.asarray(self.labels, dtype=np.int16).copy()
        if labels.shape != self.intensity.shape:
            raise DomainError(
                f"labels {labels.shape} do not match intensity {self.intensity.shape}"
            )
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @property
    def shape(self) -> Tuple[int, int]:
        """(height, width) of the labelled field."""
        return self.intensity.shape


def assign_rings(intensity: GrayField,
                 band_edges: Sequence[float] = DEFAULT_BAND_EDGES) -> RingField:
    """
    Map falloff intensity to ring labels.

    Band i covers (edge[i-1], edge[i]]; the lowest band is the surface tint (20)
    and the highest the dark core (99). Zero intensity keeps label 0.
    """
    values = intensity.values
    if not np.all(np.isfinite(values)) or values.min() < 0.0 or values.max() > 1.0:
        raise DomainError("ring intensity must lie in [0, 1]")
    edges = np.asarray(band_edges, dtype=np.float64)
    if edges.shape != (len(RING_LABELS) - 1,):
        raise DomainError(f"expected {len(RING_LABELS) - 1} band edges, got {len(edges)}")
    band = np.searchsorted(edges, values, side="left")
    labels = np.asarray(RING_LABELS, dtype=np.int16)[band]
    labels[values == 0.0] = 0
    return RingField(intensity=intensity, labels=labels)


def perturb_table(base: CorruptionTable, rng: np.random.Generator,
                  amplitude: float = 0.2) -> CorruptionTable:
    """
    Jitter every multiplier by an independent factor (1 + u), u ~ U[-amplitude, amplitude].

    Draws run over labels in ascending order, channels in table order, so the
    result depends only on the stream state.
    """
    if not 0 <= amplitude < 1:
        raise DomainError(f"perturbation amplitude must be in [0, 1), got {amplitude}")
    entries = {}
    for label, mults in base.entries.items():
        factors = 1.0 + rng.uniform(-amplitude, amplitude, size=3)
        entries[label] = tuple(float(m * f) for m, f in zip(mults, factors))
    return CorruptionTable(entries)


def apply_corruption(
    clean: RasterImage,
    rings: RingField,
    table: CorruptionTable,
    sigma: Optional[float],
    mask_threshold: float = 1e-4,
) -> Tuple[RasterImage, GrayField]:
    """
    Apply the ring multipliers to a clean image.

    For each channel the change (p_c * I_c) - I_c is scaled by the falloff
    intensity, smoothed with a Gaussian of the given sigma and added back.
    Pixels whose smoothed change stays at or below `mask_threshold` in every
    channel are left untouched and fall outside the mask.

    Args:
        clean: Undamaged image.
        rings: Intensity and ring labels of the same size.
        table: Multipliers per ring.
        sigma: Smoothing sigma in pixels; None skips smoothing.
        mask_threshold: Minimum |change| that marks a pixel as defect.

    Returns:
        Tuple[RasterImage, GrayField]: Defected image and binary ground-truth mask.
    """
    require_same_shape(clean, rings)
    if sigma is not None and not sigma > 0:
        raise DomainError(f"sigma must be > 0, got {sigma}")

    labels = rings.labels
    present = set(np.unique(labels).tolist()) - {0}
    missing = present - set(table.entries)
    if missing:
        raise DomainError(f"ring labels without multipliers: {sorted(missing)}")

    mult = table.lookup_rgb()[labels]
    weight = rings.intensity.values
    planes = clean.planes
    delta = np.empty_like(planes)
    for c in range(3):
        raw = (mult[:, :, c] * planes[c] - planes[c]) * weight
        delta[c] = raw if sigma is None else blur_array(raw, sigma)

    mask = np.abs(delta).max(axis=0) > mask_threshold
    # Blur tails below the threshold are dropped so every change lies inside the mask
    delta[:, ~mask] = 0.0
    return RasterImage(planes + delta), GrayField(mask.astype(np.float64))
