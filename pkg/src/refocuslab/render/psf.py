"""Defocus point spread functions."""

from __future__ import annotations

import numpy as np


def disc_psf(radius: float) -> np.ndarray:
    """Raster-antialiased disc kernel, entries >= 0 and summing to 1.

    Pixel coverage is approximated by a 1-px linear edge ramp:
    coverage = clip(radius + 0.5 - d, 0, 1) at distance d from the center,
    which is exactly 4-fold rotationally symmetric.  radius < 0.5 returns
    the 1x1 identity kernel.
    """
    if radius < 0:
        raise ValueError(f"radius must be >= 0, got {radius}")
    if radius < 0.5:
        return np.array([[1.0]], dtype=np.float64)
    half = int(np.ceil(radius + 0.5))
    ax = np.arange(-half, half + 1, dtype=np.float64)
    xx, yy = np.meshgrid(ax, ax)
    d = np.sqrt(xx * xx + yy * yy)
    k = np.clip(radius + 0.5 - d, 0.0, 1.0)
    s = k.sum()
    return k / s
