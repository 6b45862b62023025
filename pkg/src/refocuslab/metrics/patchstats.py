"""Small-scale distribution distance over local patch statistics.

Fits a Gaussian to PCA-projected, mean-removed 7x7 grayscale patches from
each image set and reports the Frechet distance between the two fits.  This
is an intentionally self-contained stand-in for learned-feature set metrics:
same algebra, no pretrained network.
"""

from __future__ import annotations

import numpy as np
from scipy import linalg

PATCH = 7
PCA_DIMS = 16
_EPS = 1e-6


def _patches(images, stride: int = 3) -> np.ndarray:
    from .fidelity import _as_gray

    rows = []
    for img in images:
        g = _as_gray(img)
        h, w = g.shape
        if h < PATCH or w < PATCH:
            raise ValueError(f"images must be at least {PATCH}x{PATCH}")
        for y in range(0, h - PATCH + 1, stride):
            for x in range(0, w - PATCH + 1, stride):
                p = g[y:y + PATCH, x:x + PATCH].ravel()
                rows.append(p - p.mean())
    return np.asarray(rows, dtype=np.float64)


def _gaussian_fit(feats: np.ndarray):
    mu = feats.mean(axis=0)
    cov = np.cov(feats, rowvar=False)
    return mu, cov + _EPS * np.eye(cov.shape[0])


def frechet_gaussian(mu_a, cov_a, mu_b, cov_b) -> float:
    covmean = linalg.sqrtm(cov_a @ cov_b)
    if np.iscomplexobj(covmean):
        covmean = covmean.real
    d2 = float(np.sum((mu_a - mu_b) ** 2) + np.trace(cov_a + cov_b - 2.0 * covmean))
    return max(0.0, d2)


def patch_stat_distance(set_a, set_b, stride: int = 3) -> float:
    """Frechet distance between Gaussian fits of patch features of two image sets.

    The PCA basis (PCA_DIMS components) is fit on set_b, the reference set.
    Both sets need at least 30 images.
    """
    set_a, set_b = list(set_a), list(set_b)
    if len(set_a) < 30 or len(set_b) < 30:
        raise ValueError(f"patch_stat_distance needs >= 30 images per set, got {len(set_a)}/{len(set_b)}")
    pa = _patches(set_a, stride)
    pb = _patches(set_b, stride)
    center = pb.mean(axis=0)
    _, _, vt = np.linalg.svd(pb - center, full_matrices=False)
    basis = vt[:PCA_DIMS].T
    fa = (pa - center) @ basis
    fb = (pb - center) @ basis
    return frechet_gaussian(*_gaussian_fit(fa), *_gaussian_fit(fb))
