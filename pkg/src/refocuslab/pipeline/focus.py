"""Focus measurement and depth-from-focus index maps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..core.image import FocalStack, Image, InvariantError

FOCUS_WINDOW = 9
_MEDIAN_SIZE = 5
_LAPLACIAN = np.array([[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]])


@dataclass(frozen=True)
class SharpnessMap:
    values: np.ndarray  # (H, W) float64, >= 0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise InvariantError("SharpnessMap needs (H, W) values")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class IndexMap:
    """Per-pixel frame index in [0, frame_count)."""

    indices: np.ndarray  # (H, W) int
    frame_count: int

    def __post_init__(self):
        idx = np.asarray(self.indices)
        if idx.ndim != 2 or not np.issubdtype(idx.dtype, np.integer):
            raise InvariantError("IndexMap needs integer (H, W) indices")
        if idx.size and (idx.min() < 0 or idx.max() >= self.frame_count):
            raise InvariantError(
                f"IndexMap values must lie in [0, {self.frame_count}), got [{idx.min()}, {idx.max()}]")
        object.__setattr__(self, "indices", idx.astype(np.int64))


def focus_measure(image: Image, window: int = FOCUS_WINDOW) -> SharpnessMap:
    """Local variance of the 3x3 Laplacian over a square window, on grayscale."""
    if window < 3 or window % 2 == 0:
        raise ValueError(f"focus window must be odd and >= 3, got {window}")
    g = image.gray().astype(np.float64)
    lap = ndimage.convolve(g, _LAPLACIAN, mode="nearest")
    mean = ndimage.uniform_filter(lap, size=window, mode="nearest")
    mean_sq = ndimage.uniform_filter(lap * lap, size=window, mode="nearest")
    return SharpnessMap(np.maximum(mean_sq - mean * mean, 0.0))


def _frames_of(stack_or_frames):
    if isinstance(stack_or_frames, FocalStack):
        if not stack_or_frames.aligned:
            raise ValueError("depth_index_map requires an aligned stack")
        return list(stack_or_frames.frames)
    return list(stack_or_frames)


def depth_index_map(stack_or_frames, window: int = FOCUS_WINDOW) -> IndexMap:
    """Per-pixel argmax of the focus measure (ties to the lower index), median filtered 5x5."""
    frames = _frames_of(stack_or_frames)
    measures = np.stack([focus_measure(f, window).values for f in frames], axis=0)
    idx = np.argmax(measures, axis=0)  # first max = lower index on ties
    if len(frames) > 1:
        idx = ndimage.median_filter(idx, size=_MEDIAN_SIZE, mode="nearest")
    return IndexMap(idx.astype(np.int64), len(frames))
