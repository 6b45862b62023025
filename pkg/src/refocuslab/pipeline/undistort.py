"""Radial distortion correction by fixed-point inversion.

The forward model (shared with the breathing simulator) maps an undistorted
normalized radius x to h(x) = x * (1 + k1 x^2 + k2 x^4), with coordinates
normalized by the image half-diagonal.  Correction solves h(x) = y per pixel
with at least 8 fixed-point iterations x <- y / (1 + k1 x^2 + k2 x^4), then
resamples the distorted image bilinearly (border replicate).
"""

from __future__ import annotations

import numpy as np

from ..core.image import Image
from ..core.sampling import bilinear_sample

FIXED_POINT_ITERS = 8
_RESIDUAL_TOL = 1e-4
_MAX_DISPLACEMENT = 0.25  # of the half-diagonal, guarantees a contractive fixed point


class DistortionError(ValueError):
    """Coefficients are outside the invertible regime; message carries the radius."""


def _check_invertible(k1: float, k2: float) -> None:
    r = np.linspace(0.0, 1.0, 257)
    disp = np.abs(r * (k1 * r ** 2 + k2 * r ** 4))
    worst = int(np.argmax(disp))
    if disp[worst] >= _MAX_DISPLACEMENT:
        raise DistortionError(
            f"distortion displacement {disp[worst]:.3f} at normalized radius {r[worst]:.3f} "
            f"exceeds {_MAX_DISPLACEMENT} of the half-diagonal")


def invert_radial(y: np.ndarray, k1: float, k2: float, iters: int = FIXED_POINT_ITERS) -> np.ndarray:
    """Solve x * (1 + k1 x^2 + k2 x^4) = y elementwise by fixed point."""
    x = y.copy()
    for _ in range(max(iters, FIXED_POINT_ITERS)):
        x = y / (1.0 + k1 * x * x + k2 * x ** 4)
    resid = np.abs(x * (1.0 + k1 * x * x + k2 * x ** 4) - y)
    if resid.size and resid.max() > _RESIDUAL_TOL:
        bad = np.unravel_index(int(np.argmax(resid)), resid.shape)
        raise DistortionError(
            f"fixed-point inversion diverged at normalized radius {float(y[bad]):.4f} "
            f"(residual {float(resid.max()):.2e})")
    return x


def undistort(image: Image, k1: float, k2: float) -> Image:
    """Remove radial distortion with coefficients (k1, k2)."""
    if not (np.isfinite(k1) and np.isfinite(k2)):
        raise DistortionError("distortion coefficients must be finite")
    _check_invertible(k1, k2)
    if k1 == 0.0 and k2 == 0.0:
        return image
    h, w = image.height, image.width
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    norm = np.sqrt(cx * cx + cy * cy)
    yy, xx = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    dx = (xx - cx) / norm
    dy = (yy - cy) / norm
    y_r = np.sqrt(dx * dx + dy * dy)
    x_r = invert_radial(y_r, k1, k2)
    ratio = np.divide(x_r, y_r, out=np.ones_like(y_r), where=y_r > 0)
    sx = cx + dx * ratio * norm
    sy = cy + dy * ratio * norm
    return Image(np.clip(bilinear_sample(image.data, sx, sy), 0.0, 1.0))
