"""Thin-lens model: configuration, circle of confusion, focus travel mapping."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core.image import FocusSetting, InvariantError


@dataclass(frozen=True)
class LensConfig:
    """Synthetic lens parameters.

    focal_length and sensor_width are in millimeters; focus_distances in
    meters, one per stack index (index 0 = nearest focus).
    """

    focal_length: float
    f_number: float
    sensor_width: float
    image_width: int
    focus_distances: tuple

    def __post_init__(self):
        if self.focal_length <= 0:
            raise InvariantError("focal_length must be > 0")
        if self.f_number <= 0:
            raise InvariantError("f_number must be > 0")
        if self.sensor_width <= 0 or self.image_width <= 0:
            raise InvariantError("sensor_width and image_width must be > 0")
        fd = tuple(float(d) for d in self.focus_distances)
        f_m = self.focal_length * 1e-3
        for d in fd:
            if d <= f_m:
                raise InvariantError(f"focus distance {d} m must exceed focal length {f_m} m")
        object.__setattr__(self, "focus_distances", fd)

    @property
    def frame_count(self) -> int:
        return len(self.focus_distances)

    @property
    def pixels_per_mm(self) -> float:
        return self.image_width / self.sensor_width

    def settings(self) -> tuple:
        return tuple(
            FocusSetting(index=i, value=i * 0.1, distance=d) for i, d in enumerate(self.focus_distances)
        )


def focus_distances_inverse_linear(z_near: float, z_far: float, count: int) -> tuple:
    """Focus distances uniform in diopters from z_near (index 0) to z_far.

    Mimics phone-lens focus travel: equal steps in 1/z, nearest first.
    """
    if count < 2:
        raise ValueError("count must be >= 2")
    if not (0 < z_near < z_far):
        raise ValueError("need 0 < z_near < z_far")
    d_near, d_far = 1.0 / z_near, 1.0 / z_far
    diopters = np.linspace(d_near, d_far, count)
    return tuple(float(1.0 / d) for d in diopters)


def coc_radius(lens: LensConfig, z: float, z_f: float) -> float:
    """Blur-disc radius in pixels for a point at depth z when focused at z_f.

    Thin lens: radius = (A * f / (z_f - f)) * |z - z_f| / z with aperture
    A = f / f_number, evaluated in meters on the sensor, then converted to
    pixels via image_width / sensor_width.
    """
    if z <= 0:
        raise ValueError(f"point depth must be > 0, got {z}")
    f = lens.focal_length * 1e-3
    if z_f <= f:
        raise ValueError(f"focus distance {z_f} must exceed focal length {f}")
    aperture = f / lens.f_number
    radius_m = (aperture * f / (z_f - f)) * abs(z - z_f) / z
    return float(radius_m * 1e3 * lens.pixels_per_mm)


def coc_radius_map(lens: LensConfig, depth: np.ndarray, z_f: float) -> np.ndarray:
    """Vectorized coc_radius over a depth map."""
    z = np.asarray(depth, dtype=np.float64)
    if np.any(z <= 0):
        raise ValueError("depth map must be strictly positive")
    f = lens.focal_length * 1e-3
    aperture = f / lens.f_number
    radius_m = (aperture * f / (z_f - f)) * np.abs(z - z_f) / z
    return radius_m * 1e3 * lens.pixels_per_mm


def toy_lens(image_width: int = 32, count: int = 5, z_near: float = 0.35, z_far: float = 1.4,
             focal_length: float = 25.0, f_number: float = 1.6, sensor_width: float = 8.0) -> LensConfig:
    """Desk-scale lens preset sized so defocus spans a few pixels at toy resolution."""
    return LensConfig(
        focal_length=focal_length,
        f_number=f_number,
        sensor_width=sensor_width,
        image_width=image_width,
        focus_distances=focus_distances_inverse_linear(z_near, z_far, count),
    )
