from typing import Iterable, Tuple
import math

import numpy as np
from shapely.affinity import translate
from shapely.geometry import Polygon, box
from shapely.ops import unary_union

from greening_forge.DefectLayout import DefectSpec
from greening_forge.Errors import DomainError
from greening_forge.Raster import GrayField


def _fade(t: np.ndarray) -> np.ndarray:
    """Quintic smoothstep 6t^5 - 15t^4 + 10t^3."""
    return t * t * t * (t * (t * 6 - 15) + 10)


def boundary_noise(seed: int, knots: int = 12, samples: int = 360) -> np.ndarray:
    """
    Smooth periodic value noise around the unit circle.

    Args:
        seed: Noise seed.
        knots: Number of random lattice values around the circle.
        samples: Number of evenly spaced angles to evaluate.

    Returns:
        np.ndarray: `samples` values in [-1, 1]; the last sample connects smoothly to the first.
    """
    lattice = np.random.default_rng(seed).uniform(-1.0, 1.0, knots)
    pos = np.arange(samples, dtype=np.float64) * knots / samples
    i0 = np.floor(pos).astype(int)
    f = _fade(pos - i0)
    v0 = lattice[i0 % knots]
    v1 = lattice[(i0 + 1) % knots]
    return v0 + f * (v1 - v0)


def boundary_radii(spec: DefectSpec, samples: int = 360, knots: int = 12) -> np.ndarray:
    """Irregularity factor r(t) = 1 + amplitude * n(t) at `samples` angles."""
    noise = boundary_noise(spec.boundary_noise_seed, knots, samples)
    return 1.0 + spec.boundary_noise_amplitude * noise


def _core_offsets(spec: DefectSpec, xs: np.ndarray,
                  ys: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Return pixel offsets from the nearest point of the defect origin."""
    xc, yc = spec.center
    dx = xs - xc
    dy = ys - yc
    if spec.core_half_length > 0:
        ux, uy = math.cos(spec.core_angle), math.sin(spec.core_angle)
        s = np.clip(dx * ux + dy * uy, -spec.core_half_length, spec.core_half_length)
        dx = dx - s * ux
        dy = dy - s * uy
    return dx, dy


def _interpolate_radii(radii: np.ndarray, angles: np.ndarray) -> np.ndarray:
    """Boundary factor at arbitrary angles, linear between the sampled ones."""
    samples = len(radii)
    pos = np.mod(angles, 2.0 * math.pi) * samples / (2.0 * math.pi)
    i0 = np.floor(pos).astype(int) % samples
    frac = pos - np.floor(pos)
    return radii[i0] * (1.0 - frac) + radii[(i0 + 1) % samples] * frac


def _reach(spec: DefectSpec) -> float:
    radius = max(spec.semi_axes) * (1.0 + spec.boundary_noise_amplitude)
    return radius + spec.core_half_length + 1.0


def rasterize_defect(
    spec: DefectSpec,
    width: int,
    height: int,
    boundary_samples: int = 360,
    noise_knots: int = 12,
) -> GrayField:
    """
    Rasterize one defect into a falloff intensity field.

    The boundary follows x(t) = x_c + a cos(t) r(t), y(t) = y_c + b sin(t) r(t)
    with r(t) sampled at `boundary_samples` angles and interpolated in between.
    A pixel at normalized distance d from the origin (d = 1 on the boundary)
    gets intensity 1 - d^2; pixels on or beyond the boundary get 0.

    Args:
        spec: Defect to draw.
        width: Image width in pixels.
        height: Image height in pixels.
        boundary_samples: Angular resolution of the irregular boundary.
        noise_knots: Lattice size of the boundary noise.

    Returns:
        GrayField: height x width intensity in [0, 1].
    """
    if width < 1 or height < 1:
        raise DomainError(f"raster must be at least 1x1, got {width}x{height}")
    out = np.zeros((height, width), dtype=np.float64)

    # Only the defect's bounding box can be non-zero
    reach = _reach(spec)
    xc, yc = spec.center
    x0 = max(0, math.floor(xc - reach))
    x1 = min(width - 1, math.ceil(xc + reach))
    y0 = max(0, math.floor(yc - reach))
    y1 = min(height - 1, math.ceil(yc + reach))
    if x0 > x1 or y0 > y1:
        return GrayField(out)

    ys, xs = np.mgrid[y0:y1 + 1, x0:x1 + 1].astype(np.float64)
    dx, dy = _core_offsets(spec, xs, ys)
    a, b = spec.semi_axes
    u = dx / a
    v = dy / b
    rho = np.hypot(u, v)

    radii = boundary_radii(spec, boundary_samples, noise_knots)
    r = _interpolate_radii(radii, np.arctan2(v, u))

    d = rho / r
    out[y0:y1 + 1, x0:x1 + 1] = np.where(d < 1.0, 1.0 - d * d, 0.0)
    return GrayField(out)


def merge_intensity(fields: Iterable[GrayField], width: int, height: int) -> GrayField:
    """Combine overlapping defects by keeping the deeper damage per pixel."""
    merged = np.zeros((height, width), dtype=np.float64)
    for field in fields:
        np.maximum(merged, field.values, out=merged)
    return GrayField(merged)


def _radial_extent(spec: DefectSpec, radii: np.ndarray, nx: float, ny: float) -> float:
    """Distance from the origin to the boundary along the pixel-space direction (nx, ny)."""
    a, b = spec.semi_axes
    theta = math.atan2(ny / b, nx / a)
    r = float(_interpolate_radii(radii, np.array([theta]))[0])
    return r * math.hypot(a * math.cos(theta), b * math.sin(theta))


def defect_outline(spec: DefectSpec, boundary_samples: int = 360,
                   noise_knots: int = 12) -> Polygon:
    """
    Polygon of the irregular defect boundary.

    A line-shaped origin splits the outline at the core: each half is moved to
    its end of the segment and the two halves are joined by the band of
    pixels whose nearest core point lies inside the segment.
    """
    radii = boundary_radii(spec, boundary_samples, noise_knots)
    t = np.arange(boundary_samples) * 2.0 * math.pi / boundary_samples
    a, b = spec.semi_axes
    xc, yc = spec.center
    shape = Polygon(np.column_stack([a * np.cos(t) * radii, b * np.sin(t) * radii]))
    if spec.core_half_length <= 0:
        return translate(shape, xc, yc)

    h = spec.core_half_length
    ux, uy = math.cos(spec.core_angle), math.sin(spec.core_angle)
    nx, ny = -uy, ux
    left = _radial_extent(spec, radii, nx, ny)
    right = _radial_extent(spec, radii, -nx, -ny)
    big = 2.0 * _reach(spec)

    def along_core(points) -> Polygon:
        # (s, w): s along the core, w across it, relative to the defect center
        return Polygon([(s * ux + w * nx, s * uy + w * ny) for s, w in points])

    back = along_core([(0.0, big), (-big, big), (-big, -big), (0.0, -big)])
    front = along_core([(0.0, big), (big, big), (big, -big), (0.0, -big)])
    band = along_core([(-h, left), (h, left), (h, -right), (-h, -right)])
    merged = unary_union([
        translate(shape.intersection(back), -h * ux, -h * uy),
        band,
        translate(shape.intersection(front), h * ux, h * uy),
    ])
    return translate(merged, xc, yc)


def footprint_bounds(spec: DefectSpec, width: int, height: int,
                     boundary_samples: int = 360, noise_knots: int = 12) -> Tuple[float, float]:
    """
    Polygon estimate of a defect's in-image footprint and its uncertainty.

    Returns:
        Tuple[float, float]: (estimate, slack) as fractions of the image area. The
        rasterized footprint lies within estimate +/- slack.
    """
    frame = box(-0.5, -0.5, width - 0.5, height - 0.5)
    outline = defect_outline(spec, boundary_samples, noise_knots)
    area = float(width * height)
    estimate = outline.intersection(frame).area / area
    # Only pixel centers within ~0.71 px of the boundary can land on either side
    edge = outline.boundary.intersection(frame).length
    slack = (1.5 * edge + 4.0) / area
    return estimate, slack


def estimated_footprint(spec: DefectSpec, width: int, height: int,
                        boundary_samples: int = 360, noise_knots: int = 12) -> float:
    """Fraction of the image area covered by the defect outline (pixel centers at integers)."""
    return footprint_bounds(spec, width, height, boundary_samples, noise_knots)[0]


def footprint_fraction(field: GrayField) -> float:
    """Share of pixels with non-zero intensity."""
    return field.nonzero_count() / float(field.width * field.height)
