"""Bilinear raster resampling shared by the renderer and the pipeline."""

from __future__ import annotations

import numpy as np


def bilinear_sample(data: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Sample (H, W, C) data at float pixel coordinates, border-replicated.

    xs/ys are (H', W') arrays of source coordinates in pixel units where
    integer positions are pixel centers.  Out-of-bounds samples clamp to the
    edge (border replicate).
    """
    h, w = data.shape[0], data.shape[1]
    x0 = np.floor(xs)
    y0 = np.floor(ys)
    fx = (xs - x0)[..., None]
    fy = (ys - y0)[..., None]
    x0 = np.clip(x0.astype(np.int64), 0, w - 1)
    y0 = np.clip(y0.astype(np.int64), 0, h - 1)
    x1 = np.clip(x0 + 1, 0, w - 1)
    y1 = np.clip(y0 + 1, 0, h - 1)
    v00 = data[y0, x0]
    v01 = data[y0, x1]
    v10 = data[y1, x0]
    v11 = data[y1, x1]
    top = v00 * (1.0 - fx) + v01 * fx
    bot = v10 * (1.0 - fx) + v11 * fx
    return (top * (1.0 - fy) + bot * fy).astype(data.dtype)


def scale_about_center_coords(h: int, w: int, scale: float):
    """Source coordinates that magnify content by `scale` about the image center."""
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    yy, xx = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    return cx + (xx - cx) / scale, cy + (yy - cy) / scale
