from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Dict, Tuple, Union
import hashlib
import json
import logging

import yaml

from greening_forge.Errors import ConfigError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SynthConfig:
    """
    Tunable parameters of the defect simulator.

    Defaults reproduce the observed statistics of real greening damage: 60/30/10
    spot/large/both mix, 1-7 spots of 1-5 % image width, 1-2 large defects
    covering at most a third of the frame, and +/-20 % per-image multiplier jitter.

    Attributes:
        mix_probabilities: Probabilities of (spots only, large only, both).
        spot_count_range: Inclusive range of spot defects per image.
        large_count_range: Inclusive range of large defects per image.
        spot_diameter_range: Spot diameter as a fraction of image width.
        spot_aspect_range: Minor/major axis ratio of spots.
        large_max_fraction: Max in-image footprint of one large defect, as a fraction of area.
        large_offset_range: Distance of a large defect's origin outside the frame, as a
            fraction of the image extent perpendicular to the entry edge.
        large_depth_range: How far a large defect reaches into the frame, same units.
        large_spread_range: Semi-axis along the entry edge, as a fraction of that edge.
        linear_core_probability: Share of large defects with a line-shaped origin.
        linear_core_length_range: Half-length of that line, as a fraction of width.
        band_edges: Intensity edges separating the seven corruption rings.
        noise_amplitude: Boundary irregularity amplitude.
        noise_knots: Lattice points of the periodic boundary noise.
        boundary_samples: Angular samples of the irregular boundary.
        sigma_factor: Gaussian smoothing sigma as a fraction of image width.
        perturbation: Per-image multiplier jitter amplitude.
        mask_threshold: Minimum blurred |change| that counts as defect in the mask.
        resample_attempts: Large-defect redraws before axes start shrinking.
        shrink_factor: Axis scale applied per shrink step.
        output_depth: Bit depth of generated PNGs.
    """

    mix_probabilities: Tuple[float, float, float] = (0.6, 0.3, 0.1)
    spot_count_range: Tuple[int, int] = (1, 7)
    large_count_range: Tuple[int, int] = (1, 2)
    spot_diameter_range: Tuple[float, float] = (0.01, 0.05)
    spot_aspect_range: Tuple[float, float] = (0.6, 1.0)
    large_max_fraction: float = 1.0 / 3.0
    large_offset_range: Tuple[float, float] = (0.05, 0.35)
    large_depth_range: Tuple[float, float] = (0.15, 0.6)
    large_spread_range: Tuple[float, float] = (0.2, 0.6)
    linear_core_probability: float = 0.2
    linear_core_length_range: Tuple[float, float] = (0.05, 0.2)
    band_edges: Tuple[float, ...] = (0.10, 0.25, 0.45, 0.60, 0.75, 0.92)
    noise_amplitude: float = 0.15
    noise_knots: int = 12
    boundary_samples: int = 360
    sigma_factor: float = 0.004
    perturbation: float = 0.2
    mask_threshold: float = 1e-4
    resample_attempts: int = 10
    shrink_factor: float = 0.8
    output_depth: int = 8

    def __post_init__(self) -> None:
        # YAML hands us lists; store tuples so the config stays hashable
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, list):
                object.__setattr__(self, f.name, tuple(value))
        self._validate()

    def _validate(self) -> None:
        probs = self.mix_probabilities
        if len(probs) != 3 or any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-9:
            raise ConfigError(
                f"mix_probabilities must be 3 non-negative values summing to 1, got {probs}"
            )
        for name in ("spot_count_range", "large_count_range"):
            lo, hi = getattr(self, name)
            if not 1 <= lo <= hi:
                raise ConfigError(f"{name} must satisfy 1 <= min <= max, got {(lo, hi)}")
        for name in ("spot_diameter_range", "spot_aspect_range", "large_offset_range",
                     "large_depth_range", "large_spread_range", "linear_core_length_range"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise ConfigError(f"{name} must satisfy 0 < min <= max, got {(lo, hi)}")
        if self.spot_aspect_range[1] > 1.0:
            raise ConfigError("spot_aspect_range must not exceed 1")
        if not 0 < self.large_max_fraction <= 1:
            raise ConfigError(
                f"large_max_fraction must be in (0, 1], got {self.large_max_fraction}"
            )
        if not 0 <= self.linear_core_probability <= 1:
            raise ConfigError("linear_core_probability must be in [0, 1]")
        edges = self.band_edges
        increasing = list(edges) == sorted(set(edges))
        if len(edges) != 6 or any(not 0 < e < 1 for e in edges) or not increasing:
            raise ConfigError(
                f"band_edges must be 6 strictly increasing values in (0, 1), got {edges}"
            )
        if not 0 <= self.noise_amplitude < 1:
            raise ConfigError(f"noise_amplitude must be in [0, 1), got {self.noise_amplitude}")
        if self.noise_knots < 3 or self.boundary_samples < 8:
            raise ConfigError("noise_knots must be >= 3 and boundary_samples >= 8")
        if not self.sigma_factor > 0:
            raise ConfigError(f"sigma_factor must be > 0, got {self.sigma_factor}")
        if not 0 <= self.perturbation < 1:
            raise ConfigError(f"perturbation must be in [0, 1), got {self.perturbation}")
        if not 0 < self.mask_threshold < 1:
            raise ConfigError(f"mask_threshold must be in (0, 1), got {self.mask_threshold}")
        if self.resample_attempts < 1 or not 0 < self.shrink_factor < 1:
            raise ConfigError("resample_attempts must be >= 1 and shrink_factor in (0, 1)")
        if self.output_depth not in (8, 16):
            raise ConfigError(f"output_depth must be 8 or 16, got {self.output_depth}")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SynthConfig":
        """Build a config from a mapping; unknown keys raise ConfigError."""
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(f"invalid config value: {exc}") from exc

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "SynthConfig":
        """Load a YAML key-value config; missing keys keep their defaults."""
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"config file not found: {path}")
        try:
            data = yaml.safe_load(path.read_text())
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse config {path}: {exc}") from exc
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must be a mapping of keys to values")
        logger.info("Loaded synthesis config from %s", path)
        return cls.from_dict(data)

    def to_dict(self) -> Dict[str, Any]:
        """Return the config as JSON-ready data with tuples as lists."""
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form; stable across runs and platforms."""
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def sigma_for(self, width: int) -> float:
        """Gaussian smoothing sigma in pixels for an image `width` pixels wide."""
        return self.sigma_factor * width
