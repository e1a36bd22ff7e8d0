from collections import Counter
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, Iterable, List, Tuple

from greening_forge.Errors import DomainError


class DefectKind(Enum):
    """Spot inside the frame or large-area defect entering from outside."""

    SPOT = "spot"
    LARGE = "large"


class MixClass(Enum):
    """Which defect kinds a layout holds."""

    SPOTS_ONLY = "spots_only"
    LARGE_ONLY = "large_only"
    BOTH = "both"


@dataclass(frozen=True)
class DefectSpec:
    """
    One irregular elliptical defect.

    Spots have their center inside the frame; large defects originate outside
    it and only their skirt reaches into the image.

    Attributes:
        kind (DefectKind): Spot or large-area defect.
        center (Tuple[float, float]): (x_c, y_c) in pixel coordinates, may lie off-image.
        semi_axes (Tuple[float, float]): (a, b) along x and y, in pixels.
        boundary_noise_seed (int): Seed of the periodic boundary noise.
        boundary_noise_amplitude (float): Relative radius jitter in [0, 1).
        core_half_length (float): Half-length of a line-shaped origin; 0 for a point origin.
        core_angle (float): Direction of the line-shaped origin, radians.
    """

    kind: DefectKind
    center: Tuple[float, float]
    semi_axes: Tuple[float, float]
    boundary_noise_seed: int
    boundary_noise_amplitude: float
    core_half_length: float = 0.0
    core_angle: float = 0.0

    def __post_init__(self) -> None:
        a, b = self.semi_axes
        if not (a > 0 and b > 0):
            raise DomainError(f"semi-axes must be positive, got {self.semi_axes}")
        if not 0 <= self.boundary_noise_amplitude < 1:
            raise DomainError(
                f"boundary noise amplitude must be in [0, 1), got {self.boundary_noise_amplitude}"
            )
        if self.core_half_length < 0:
            raise DomainError("core_half_length must be >= 0")

    @property
    def diameter(self) -> float:
        """Largest unperturbed diameter, max(2a, 2b)."""
        return 2.0 * max(self.semi_axes)

    def center_inside(self, width: int, height: int) -> bool:
        """Return whether the center lies within the pixel grid."""
        x, y = self.center
        return 0 <= x < width and 0 <= y < height

    def scaled(self, factor: float) -> "DefectSpec":
        """Return the same defect with axes and core scaled about its center."""
        a, b = self.semi_axes
        return replace(
            self,
            semi_axes=(a * factor, b * factor),
            core_half_length=self.core_half_length * factor,
        )

    def to_dict(self) -> Dict[str, object]:
        """Return the defect as JSON-ready data."""
        return {
            "kind": self.kind.value,
            "center": [float(self.center[0]), float(self.center[1])],
            "semi_axes": [float(self.semi_axes[0]), float(self.semi_axes[1])],
            "boundary_noise_seed": int(self.boundary_noise_seed),
            "boundary_noise_amplitude": float(self.boundary_noise_amplitude),
            "core_half_length": float(self.core_half_length),
            "core_angle": float(self.core_angle),
        }


@dataclass(frozen=True)
class DefectLayout:
    """Every defect drawn for one image, plus the mix class it was drawn under."""

    specs: Tuple[DefectSpec, ...]
    mix_class: MixClass

    def __post_init__(self) -> None:
        object.__setattr__(self, "specs", tuple(self.specs))
        n_spots, n_large = len(self.spots), len(self.larges)
        expected = {
            MixClass.SPOTS_ONLY: n_spots >= 1 and n_large == 0,
            MixClass.LARGE_ONLY: n_large >= 1 and n_spots == 0,
            MixClass.BOTH: n_spots >= 1 and n_large >= 1,
        }
        if not expected[self.mix_class]:
            raise DomainError(
                f"{self.mix_class.value} layout cannot hold "
                f"{n_spots} spots and {n_large} large defects"
            )

    @property
    def spots(self) -> List[DefectSpec]:
        """Spot defects of the layout, in draw order."""
        return [s for s in self.specs if s.kind is DefectKind.SPOT]

    @property
    def larges(self) -> List[DefectSpec]:
        """Large defects of the layout, in draw order."""
        return [s for s in self.specs if s.kind is DefectKind.LARGE]

    def __len__(self) -> int:
        return len(self.specs)


@dataclass(frozen=True)
class LayoutStatistics:
    """Aggregate view over many sampled layouts, used to audit the sampler."""

    count: int
    class_fractions: Dict[MixClass, float]
    spot_count_histogram: Dict[int, int]
    large_count_histogram: Dict[int, int]
    spot_diameter_range: Tuple[float, float]


def layout_statistics(layouts: Iterable[DefectLayout]) -> LayoutStatistics:
    """

    Summarize a batch of layouts.

    Spot counts are tallied only for layouts that contain spots, large counts
    only for layouts that contain large defects.
    """
    classes: Counter = Counter()
    spot_counts: Counter = Counter()
    large_counts: Counter = Counter()
    diameters: List[float] = []
    total = 0
    for layout in layouts:
        total += 1
        classes[layout.mix_class] += 1
        if layout.spots:
            spot_counts[len(layout.spots)] += 1
            diameters.extend(s.diameter for s in layout.spots)
        if layout.larges:
            large_counts[len(layout.larges)] += 1
    if total == 0:
        raise DomainError("no layouts to summarize")
    return LayoutStatistics(
        count=total,
        class_fractions={m: classes[m] / total for m in MixClass},
        spot_count_histogram=dict(sorted(spot_counts.items())),
        large_count_histogram=dict(sorted(large_counts.items())),
        spot_diameter_range=(min(diameters), max(diameters)) if diameters else (0.0, 0.0),
    )
