"""Raster and focal-stack domain types.

All pixel data is linear-light float32 in [0, 1], stored row-major as
(height, width, channels).  Types validate their invariants on construction
and freeze their arrays, so instances are safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class InvariantError(ValueError):
    """A domain-type invariant was violated at construction."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Image:
    """Dense raster, values in [0, 1], 1 (gray) or 3 (RGB) channels."""

    data: np.ndarray  # (H, W, C) float32

    def __post_init__(self):
        d = np.asarray(self.data, dtype=np.float32)
        if d.ndim == 2:
            d = d[:, :, None]
        if d.ndim != 3 or d.shape[2] not in (1, 3):
            raise InvariantError(f"Image needs (H, W, 1|3) data, got shape {np.asarray(self.data).shape}")
        if not np.all(np.isfinite(d)):
            raise InvariantError("Image contains non-finite values")
        if d.size and (d.min() < -1e-6 or d.max() > 1.0 + 1e-6):
            raise InvariantError(f"Image values outside [0,1]: min={d.min()}, max={d.max()}")
        object.__setattr__(self, "data", _frozen(np.clip(d, 0.0, 1.0)))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    def gray(self) -> np.ndarray:
        """Luma as (H, W) float32 (Rec.601 weights for RGB)."""
        if self.channels == 1:
            return self.data[:, :, 0]
        w = np.array([0.299, 0.587, 0.114], dtype=np.float32)
        return self.data @ w

    @staticmethod
    def from_array(a: np.ndarray) -> "Image":
        return Image(np.clip(np.asarray(a, dtype=np.float32), 0.0, 1.0))


@dataclass(frozen=True)
class DepthMap:
    """Per-pixel scene depth in meters; strictly positive and finite."""

    depth: np.ndarray  # (H, W) float32

    def __post_init__(self):
        d = np.asarray(self.depth, dtype=np.float32)
        if d.ndim != 2:
            raise InvariantError(f"DepthMap needs (H, W) data, got shape {d.shape}")
        if not np.all(np.isfinite(d)):
            raise InvariantError("DepthMap contains non-finite values")
        if d.size and d.min() <= 0:
            raise InvariantError(f"DepthMap has non-positive depths (min={d.min()})")
        object.__setattr__(self, "depth", _frozen(d))

    @property
    def height(self) -> int:
        return self.depth.shape[0]

    @property
    def width(self) -> int:
        return self.depth.shape[1]


@dataclass(frozen=True)
class FocusSetting:
    """One focus position of a stack.

    `value` follows the phone-API convention value = index * 0.1 (0 is the
    nearest focus).  `distance` is the renderer-defined focus distance in
    meters; no monotonic relation between value and distance is assumed
    beyond what the lens mapping states explicitly.
    """

    index: int
    value: float
    distance: float

    def __post_init__(self):
        if self.index < 0:
            raise InvariantError(f"FocusSetting.index must be >= 0, got {self.index}")
        if not (0.0 <= self.value <= 0.8 + 1e-9):
            raise InvariantError(f"FocusSetting.value must be in [0, 0.8], got {self.value}")
        if not (np.isfinite(self.distance) and self.distance > 0):
            raise InvariantError(f"FocusSetting.distance must be positive, got {self.distance}")


@dataclass(frozen=True)
class FocalStack:
    """F >= 2 equally-sized frames with per-frame focus settings."""

    frames: tuple
    settings: tuple
    aligned: bool = False

    def __post_init__(self):
        frames = tuple(self.frames)
        settings = tuple(self.settings)
        if len(frames) < 2:
            raise InvariantError(f"FocalStack needs >= 2 frames, got {len(frames)}")
        if len(frames) != len(settings):
            raise InvariantError("frame count != setting count")
        h, w, c = frames[0].height, frames[0].width, frames[0].channels
        for f in frames[1:]:
            if (f.height, f.width, f.channels) != (h, w, c):
                raise InvariantError("FocalStack frames must share dimensions")
        for i, s in enumerate(settings):
            if s.index != i:
                raise InvariantError(f"settings must be sorted by index 0..F-1, got index {s.index} at slot {i}")
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "settings", settings)

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def shape(self) -> tuple:
        f0 = self.frames[0]
        return (len(self.frames), f0.height, f0.width, f0.channels)

    def as_array(self) -> np.ndarray:
        """Stack pixels as (F, H, W, C) float32."""
        return np.stack([f.data for f in self.frames], axis=0)

    def with_frames(self, frames: Sequence[Image], aligned: bool | None = None) -> "FocalStack":
        return FocalStack(tuple(frames), self.settings, self.aligned if aligned is None else aligned)


@dataclass(frozen=True)
class StackManifest:
    """On-disk description of a stack: paths, settings, processing flags."""

    scene_id: str
    frame_paths: tuple
    settings: tuple  # (index, value) pairs or FocusSettings
    aligned: bool = False
    undistorted: bool = False
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        paths = tuple(self.frame_paths)
        settings = tuple(self.settings)
        if len(paths) == 0:
            raise InvariantError("manifest must list at least one frame")
        if len(paths) != len(settings):
            raise InvariantError(f"path count ({len(paths)}) != settings count ({len(settings)})")
        object.__setattr__(self, "frame_paths", paths)
        object.__setattr__(self, "settings", settings)

    @property
    def frame_count(self) -> int:
        return len(self.frame_paths)
