"""Focal breathing simulation: per-frame scale change plus radial distortion.

Frame i samples the clean frame at positions magnified by 1/magnification[i]
and radially displaced by r' = r * (1 + k1 r^2 + k2 r^4) in coordinates
normalized by the half-diagonal (r = 1 at the corners).  Frame 0 is the
alignment reference and must keep magnification 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core.image import FocalStack, Image, InvariantError
from ..core.sampling import bilinear_sample


@dataclass(frozen=True)
class BreathingProfile:
    magnification: tuple
    k1: tuple
    k2: tuple

    def __post_init__(self):
        mags = tuple(float(m) for m in self.magnification)
        k1 = tuple(float(k) for k in self.k1)
        k2 = tuple(float(k) for k in self.k2)
        if not (len(mags) == len(k1) == len(k2)):
            raise InvariantError("magnification/k1/k2 must have equal length")
        if any(m <= 0 for m in mags):
            raise InvariantError("magnification must be > 0")
        if abs(mags[0] - 1.0) > 1e-12:
            raise InvariantError("index 0 magnification must be 1 (alignment reference frame)")
        object.__setattr__(self, "magnification", mags)
        object.__setattr__(self, "k1", k1)
        object.__setattr__(self, "k2", k2)

    def __len__(self) -> int:
        return len(self.magnification)

    @staticmethod
    def identity(count: int) -> "BreathingProfile":
        return BreathingProfile((1.0,) * count, (0.0,) * count, (0.0,) * count)


def default_breathing_profile(count: int, mag_span: float = 0.03,
                              k1_max: float = 0.04, k2_max: float = 0.01) -> BreathingProfile:
    """Plausible monotone profile: field of view widens (content shrinks) toward far focus."""
    t = np.linspace(0.0, 1.0, count)
    mags = tuple(float(1.0 - mag_span * ti) for ti in t)
    k1 = tuple(float(k1_max * ti) for ti in t)
    k2 = tuple(float(k2_max * ti) for ti in t)
    return BreathingProfile(mags, k1, k2)


def warp_breathe(img: Image, magnification: float, k1: float, k2: float) -> Image:
    """Apply the forward breathing warp (magnify content, then distort)."""
    h, w = img.height, img.width
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    norm = np.sqrt(cx * cx + cy * cy)
    yy, xx = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    dx = (xx - cx) / norm
    dy = (yy - cy) / norm
    r2 = dx * dx + dy * dy
    gain = 1.0 + k1 * r2 + k2 * r2 * r2
    # distortion sampling first (outermost op), then the magnification sampling
    sx = cx + (dx * gain * norm) / magnification
    sy = cy + (dy * gain * norm) / magnification
    return Image(np.clip(bilinear_sample(img.data, sx, sy), 0.0, 1.0))


def simulate_breathing(stack: FocalStack, profile: BreathingProfile) -> FocalStack:
    """Degrade an aligned stack with per-frame breathing; clears the aligned flag."""
    if not stack.aligned:
        raise ValueError("simulate_breathing expects an aligned stack")
    if len(profile) != len(stack):
        raise ValueError(f"profile length {len(profile)} != stack length {len(stack)}")
    frames = []
    for i, frame in enumerate(stack.frames):
        m, a, b = profile.magnification[i], profile.k1[i], profile.k2[i]
        if m == 1.0 and a == 0.0 and b == 0.0:
            frames.append(frame)  # bitwise unchanged
        else:
            frames.append(warp_breathe(frame, m, a, b))
    return FocalStack(tuple(frames), stack.settings, aligned=False)
