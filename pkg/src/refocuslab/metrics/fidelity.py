"""Per-image fidelity and sharpness metrics.

All metrics take Images (or raw (H, W[, C]) arrays in [0, 1]), convert RGB
to grayscale with the canonical Rec.601 weights where a single channel is
needed, and are deterministic.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import ndimage

from ..core.image import Image

#: value returned by psnr for bit-identical inputs
PSNR_EXACT = math.inf

_LAPLACIAN = np.array([[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]])
# white-noise energy gain of the Laplacian kernel (sum of squared taps)
_LAPLACIAN_GAIN = float((_LAPLACIAN ** 2).sum())


def _as_array(img) -> np.ndarray:
    if isinstance(img, Image):
        return img.data.astype(np.float64)
    a = np.asarray(img, dtype=np.float64)
    return a[:, :, None] if a.ndim == 2 else a


def _as_gray(img) -> np.ndarray:
    a = _as_array(img)
    if a.shape[2] == 1:
        return a[:, :, 0]
    return a @ np.array([0.299, 0.587, 0.114])


def psnr(a, b) -> float:
    """Peak signal-to-noise ratio in dB for [0,1] images; equal inputs give PSNR_EXACT (inf)."""
    x, y = _as_array(a), _as_array(b)
    if x.shape != y.shape:
        raise ValueError(f"psnr: shape mismatch {x.shape} vs {y.shape}")
    mse = float(np.mean((x - y) ** 2))
    if mse == 0.0:
        return PSNR_EXACT
    return 10.0 * math.log10(1.0 / mse)


def ssim(a, b, window: int = 11) -> float:
    """Single-scale SSIM (k1=0.01, k2=0.03, L=1, Gaussian window sigma=1.5) on grayscale."""
    x, y = _as_gray(a), _as_gray(b)
    if x.shape != y.shape:
        raise ValueError(f"ssim: shape mismatch {x.shape} vs {y.shape}")
    if window % 2 == 0 or window < 3:
        raise ValueError("ssim window must be odd and >= 3")
    c1, c2 = 0.01 ** 2, 0.03 ** 2
    sigma = 1.5
    trunc = ((window - 1) / 2) / sigma

    def g(im):
        return ndimage.gaussian_filter(im, sigma=sigma, truncate=trunc, mode="reflect")

    mu_x, mu_y = g(x), g(y)
    var_x = g(x * x) - mu_x ** 2
    var_y = g(y * y) - mu_y ** 2
    cov = g(x * y) - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
    den = (mu_x ** 2 + mu_y ** 2 + c1) * (var_x + var_y + c2)
    return float(np.mean(num / den))


def hf_energy(img) -> float:
    """High-frequency energy fraction in [0, 1].

    Energy of the 3x3 Laplacian response, normalized by the kernel's
    white-noise gain, relative to the image's total AC energy; a flat image
    scores 0 by convention and broadband white noise scores ~1.
    """
    g = _as_gray(img)
    ac = float(np.sum((g - g.mean()) ** 2))
    if ac <= 0.0:
        return 0.0
    lap = ndimage.convolve(g, _LAPLACIAN, mode="reflect")
    ratio = float(np.sum(lap ** 2)) / (_LAPLACIAN_GAIN * ac)
    return min(1.0, ratio)
