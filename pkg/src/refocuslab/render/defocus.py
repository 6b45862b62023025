"""Layered occlusion-aware defocus rendering.

Depth is quantized into at most L=16 layers uniform in diopters (1/z), each
layer is blurred by its disc PSF with premultiplied alpha, and layers are
composited back to front.  Border handling is replicate, so constant-depth
scenes conserve mean energy exactly up to convolution round-off.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy import ndimage

from ..core.image import DepthMap, FocalStack, Image
from .lens import LensConfig, coc_radius
from .psf import disc_psf

DEPTH_LAYERS = 16


def _convolve(channel: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    if kernel.shape == (1, 1):
        return channel * kernel[0, 0]
    return ndimage.convolve(channel, kernel, mode="nearest")


def _layer_depths(depth: np.ndarray, layers: int):
    """Quantize depths into <= layers bins uniform in 1/z; returns (ids, representative depths)."""
    uniq = np.unique(depth)
    if uniq.size <= layers:
        ids = np.searchsorted(uniq, depth)
        return ids, uniq.astype(np.float64)
    inv = 1.0 / depth
    lo, hi = inv.min(), inv.max()
    edges = np.linspace(lo, hi, layers + 1)
    ids = np.clip(np.digitize(inv, edges) - 1, 0, layers - 1)
    reps = np.full(layers, np.nan)
    for k in range(layers):
        sel = ids == k
        if np.any(sel):
            reps[k] = depth[sel].mean()
    return ids, reps


def render_defocus(aif: Image, depth: DepthMap, lens: LensConfig, z_f: float,
                   layers: int = DEPTH_LAYERS) -> Image:
    """Render one defocused view of (aif, depth) focused at z_f meters."""
    if (aif.height, aif.width) != (depth.height, depth.width):
        raise ValueError(
            f"aif {aif.height}x{aif.width} and depth {depth.height}x{depth.width} dimensions differ")
    rgb = aif.data.astype(np.float64)
    d = depth.depth.astype(np.float64)
    ids, reps = _layer_depths(d, layers)

    acc_rgb = np.zeros_like(rgb)
    acc_a = np.zeros(d.shape, dtype=np.float64)
    # back to front: largest representative depth first
    order = [k for k in np.argsort(-np.nan_to_num(reps, nan=-1.0)) if np.isfinite(reps[k])]
    for k in order:
        mask = (ids == k).astype(np.float64)
        if not mask.any():
            continue
        kernel = disc_psf(coc_radius(lens, float(reps[k]), z_f))
        a = _convolve(mask, kernel)
        col = np.stack([_convolve(rgb[:, :, c] * mask, kernel) for c in range(rgb.shape[2])], axis=-1)
        acc_rgb = col + (1.0 - a)[:, :, None] * acc_rgb
        acc_a = a + (1.0 - a) * acc_a
    out = acc_rgb / np.maximum(acc_a, 1e-8)[:, :, None]
    return Image(np.clip(out, 0.0, 1.0).astype(np.float32))


def render_stack(aif: Image, depth: DepthMap, lens: LensConfig,
                 layers: int = DEPTH_LAYERS, workers: int = 1) -> FocalStack:
    """Render one frame per lens focus distance; frames collected in index order."""
    settings = lens.settings()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            frames = list(pool.map(lambda s: render_defocus(aif, depth, lens, s.distance, layers), settings))
    else:
        frames = [render_defocus(aif, depth, lens, s.distance, layers) for s in settings]
    return FocalStack(tuple(frames), settings, aligned=True)
