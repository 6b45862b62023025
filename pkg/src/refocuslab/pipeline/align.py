"""Scale-only stack alignment against frame 0.

Focal breathing leaves a per-frame magnification error; the paper's rig
needs no translation or rotation correction, so alignment is a single scale
about the image center.  Scales are either supplied (pre-calculated) or
estimated by maximizing normalized cross-correlation of 4x-downsampled
grayscale pairs with a golden-section search.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from ..core.image import FocalStack, Image
from ..core.sampling import bilinear_sample, scale_about_center_coords

SCALE_WINDOW = (0.90, 1.10)
SEARCH_TOL = 1e-4
_DOWNSAMPLE = 4
_PREFILTER_SIGMA = 1.0
_COARSE_STEPS = 41
_GOLDEN_RATIO = (np.sqrt(5.0) - 1.0) / 2.0


class AlignmentError(ValueError):
    pass


def _downsample4(gray: np.ndarray) -> np.ndarray:
    h, w = gray.shape
    hh, ww = h // _DOWNSAMPLE, w // _DOWNSAMPLE
    if hh < 4 or ww < 4:
        raise AlignmentError(f"image too small for 4x-downsampled scale estimation: {h}x{w}")
    g = gray[: hh * _DOWNSAMPLE, : ww * _DOWNSAMPLE]
    return g.reshape(hh, _DOWNSAMPLE, ww, _DOWNSAMPLE).mean(axis=(1, 3))


def scale_image(img: Image, scale: float) -> Image:
    """Magnify content by `scale` about the image center (bilinear, replicate)."""
    if scale == 1.0:
        return img
    sx, sy = scale_about_center_coords(img.height, img.width, scale)
    return Image(np.clip(bilinear_sample(img.data, sx, sy), 0.0, 1.0))


def _ncc(a: np.ndarray, b: np.ndarray) -> float:
    # interior crop dodges border-replicate bias from the scale warp
    m = max(2, a.shape[0] // 8, a.shape[1] // 8)
    aa = a[m:-m, m:-m] if a.shape[0] > 2 * m and a.shape[1] > 2 * m else a
    bb = b[m:-m, m:-m] if b.shape[0] > 2 * m and b.shape[1] > 2 * m else b
    aa = aa - aa.mean()
    bb = bb - bb.mean()
    denom = np.sqrt((aa * aa).sum() * (bb * bb).sum())
    if denom == 0:
        return 0.0
    return float((aa * bb).sum() / denom)


def _warp_small(gray: np.ndarray, scale: float) -> np.ndarray:
    # the constant half-pixel grid offset makes every candidate scale pay the
    # same bilinear smoothing cost, so scale 1.0 holds no spurious advantage
    sx, sy = scale_about_center_coords(gray.shape[0], gray.shape[1], scale)
    return bilinear_sample(gray[:, :, None], sx + 0.5, sy + 0.5)[:, :, 0]


def _prepare(img: Image) -> np.ndarray:
    small = _downsample4(img.gray().astype(np.float64))
    return ndimage.gaussian_filter(small, _PREFILTER_SIGMA, mode="nearest")


def estimate_scale(reference: Image, moving: Image) -> float:
    """Content magnification of `moving` relative to `reference` in [0.90, 1.10].

    A frame produced by magnifying the reference by s estimates as s; the
    corrective warp that aligns it back is therefore 1/s.  A coarse scan
    brackets the NCC peak, then golden-section refines it to SEARCH_TOL.
    Strong defocus differences bias the estimate slightly (the disc blur's
    ringing MTF couples into the correlation); within one or two focus steps
    of the toy lens the estimate stays within a few 1e-3 of truth.
    """
    if (reference.height, reference.width) != (moving.height, moving.width):
        raise AlignmentError("estimate_scale: images must share dimensions")
    ref = _prepare(reference)
    mov = _prepare(moving)
    if ref.std() < 1e-8 or mov.std() < 1e-8:
        raise AlignmentError("estimate_scale: flat image, scale is unestimable")
    mov = _warp_small(mov, 1.0)

    def objective(s: float) -> float:
        return -_ncc(_warp_small(ref, s), mov)

    grid = np.linspace(SCALE_WINDOW[0], SCALE_WINDOW[1], _COARSE_STEPS)
    coarse = [objective(s) for s in grid]
    k = int(np.argmin(coarse))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, len(grid) - 1)]

    c = hi - _GOLDEN_RATIO * (hi - lo)
    d = lo + _GOLDEN_RATIO * (hi - lo)
    fc, fd = objective(c), objective(d)
    while hi - lo > SEARCH_TOL:
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - _GOLDEN_RATIO * (hi - lo)
            fc = objective(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _GOLDEN_RATIO * (hi - lo)
            fd = objective(d)
    return float((lo + hi) / 2.0)


def estimate_stack_scales(stack: FocalStack) -> tuple:
    """Per-frame content scale relative to frame 0 (frame 0 gets exactly 1.0)."""
    ref = stack.frames[0]
    return (1.0,) + tuple(estimate_scale(ref, f) for f in stack.frames[1:])


def align_stack(stack: FocalStack, scales=None) -> FocalStack:
    """Warp every frame to frame 0's geometry; frame 0 stays bitwise unchanged.

    `scales` holds per-frame content magnifications relative to frame 0
    (what estimate_stack_scales returns, or pre-calculated values); each
    frame is warped by the inverse.  Scale 1.0 skips resampling entirely.
    """
    if stack.aligned:
        raise AlignmentError("align_stack: stack is already aligned")
    if scales is None:
        scales = estimate_stack_scales(stack)
    scales = tuple(float(s) for s in scales)
    if len(scales) != len(stack):
        raise AlignmentError(f"align_stack: {len(scales)} scales for {len(stack)} frames")
    frames = [stack.frames[0]]
    frames += [scale_image(f, 1.0 / s) for f, s in zip(stack.frames[1:], scales[1:])]
    return FocalStack(tuple(frames), stack.settings, aligned=True)
